"""Synthetic case streams with drifting parameters and a replication harness.

Every replication draws features, noise and drift from three independent
PCG64 substreams spawned from one seed, so changing the drift law leaves the
feature and noise draws untouched (common random numbers across settings).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .metrics import relative_accuracy, theorem2_bound
from .mlms import Hyperparams, RunReport, iter_arrays, run_stream
from .noise import GaussianNoiseModel
from .sms_core import (
    N_INJURY_LEVELS,
    CaseRecord,
    StructuralParams,
    build_regressors,
    build_theta,
    regressor_dim,
)

DRIFT_MODES = ("constant", "random_walk", "piecewise_jump")


@dataclass(frozen=True)
class DriftSpec:
    """How the true parameter moves between cases.

    ``random_walk`` takes a step of norm ``step_norm`` in a uniformly random
    direction every case.  ``piecewise_jump`` stays put and jumps by
    ``jump_norm`` every ``period`` cases, which keeps the long-run average
    movement at ``jump_norm / period`` while individual jumps exceed it.
    """

    mode: str = "constant"
    xi: float = 0.0
    step_norm: float = 0.0
    jump_norm: float = 0.0
    period: int = 1

    def __post_init__(self):
        if self.mode not in DRIFT_MODES:
            raise ValueError(f"unknown drift mode {self.mode!r}")
        if self.mode == "constant":
            return
        if not 0 < self.xi < 1:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")
        if self.mode == "random_walk" and not 0 <= self.step_norm <= self.xi:
            raise ValueError(f"random walk step {self.step_norm} exceeds the drift budget {self.xi}")
        if self.mode == "piecewise_jump":
            if self.period < 1:
                raise ValueError("period must be >= 1")
            if self.jump_norm < 0 or self.jump_norm / self.period > self.xi * (1 + 1e-12):
                raise ValueError(
                    f"jump {self.jump_norm} every {self.period} cases exceeds the drift budget {self.xi}"
                )

    @classmethod
    def random_walk(cls, xi: float) -> "DriftSpec":
        return cls("random_walk", xi=xi, step_norm=xi)

    @classmethod
    def piecewise_jump(cls, jump_norm: float, period: int) -> "DriftSpec":
        return cls("piecewise_jump", xi=jump_norm / period, jump_norm=jump_norm, period=period)


@dataclass(frozen=True)
class CountLaw:
    """Victim counts: independent Poisson draws truncated at ``cap``."""

    rates: tuple[float, ...] = (0.3, 0.2, 0.1, 0.05)
    cap: int = 3

    def __post_init__(self):
        if len(self.rates) != N_INJURY_LEVELS or min(self.rates) < 0:
            raise ValueError("need four non-negative rates")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.minimum(rng.poisson(self.rates, size=(n, N_INJURY_LEVELS)), self.cap).astype(float)


@dataclass(frozen=True)
class StartingPoint:
    """Sentencing starting point, uniform on ``[low, high]`` (constant if equal)."""

    low: float = 12.0
    high: float = 12.0

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise ValueError("need 0 <= low <= high")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.low == self.high:
            return np.full(n, self.low)
        return rng.uniform(self.low, self.high, size=n)


@dataclass(frozen=True)
class StreamSpec:
    structural: StructuralParams
    T: int = 10_000
    seed: int = 0
    lower: float = 36.0
    upper: float = 120.0
    z_probs: tuple[float, ...] = ()
    v_probs: tuple[float, ...] = ()
    count_law: CountLaw = field(default_factory=CountLaw)
    a_law: StartingPoint = field(default_factory=StartingPoint)
    drift: DriftSpec = field(default_factory=DriftSpec)
    noise: GaussianNoiseModel = field(default_factory=lambda: GaussianNoiseModel(1.0))
    box_radius: float = 100.0
    group: str = "custom"

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0 < self.lower < self.upper:
            raise ValueError("bounds must satisfy 0 < lower < upper")
        m1, m2 = self.structural.m1, self.structural.m2
        if not self.z_probs:
            object.__setattr__(self, "z_probs", (0.5,) * m1)
        if not self.v_probs:
            object.__setattr__(self, "v_probs", (0.5,) * m2)
        if len(self.z_probs) != m1 or len(self.v_probs) != m2:
            raise ValueError("feature probabilities must match the structural dimensions")
        if any(not 0 <= t <= 1 for t in (*self.z_probs, *self.v_probs)):
            raise ValueError("feature probabilities must lie in [0, 1]")

    @property
    def m1(self) -> int:
        return self.structural.m1

    @property
    def m2(self) -> int:
        return self.structural.m2

    @property
    def dim(self) -> int:
        return regressor_dim(self.m1, self.m2)

    def phi_norm_cap(self) -> float:
        """Upper bound on ``||phi||`` implied by the feature laws."""
        mult = math.sqrt(self.a_law.high**2 + N_INJURY_LEVELS * self.count_law.cap**2)
        return mult * math.sqrt((2**self.m1) * (1 + self.m2))


def _substreams(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def _random_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def gen_parameter_path(theta0, drift: DriftSpec, T: int, rng, box_radius: Optional[float] = None) -> np.ndarray:
    """``(T, p)`` array of parameters starting at ``theta0``.

    Each perturbed parameter is clipped back into the box; clipping never
    lengthens a step since the previous point already lies in the box.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.PCG64(int(rng)))
    radius = box_radius if box_radius is not None else getattr(theta0, "box_radius", None)
    theta0 = np.asarray(getattr(theta0, "values", theta0), dtype=float)
    if radius is None:
        raise ValueError("box_radius is required for a bare parameter vector")
    if np.any(np.abs(theta0) > radius):
        raise ValueError("theta0 lies outside the box")
    path = np.empty((T, theta0.size))
    path[0] = theta0
    if drift.mode == "constant":
        path[1:] = theta0
        return path
    if drift.mode == "random_walk":
        steps = drift.step_norm * _random_directions(rng, T - 1, theta0.size)
        for k in range(1, T):
            path[k] = np.clip(path[k - 1] + steps[k - 1], -radius, radius)
        return path
    n_jumps = (T - 1) // drift.period
    jumps = drift.jump_norm * _random_directions(rng, max(n_jumps, 0), theta0.size)
    current = theta0
    j = 0
    for k in range(1, T):
        if k % drift.period == 0:
            current = np.clip(current + jumps[j], -radius, radius)
            j += 1
        path[k] = current
    return path


def step_norms(path: np.ndarray) -> np.ndarray:
    """``||theta_k - theta_{k-1}||`` for ``k = 1..T-1``."""
    return np.linalg.norm(np.diff(path, axis=0), axis=1)


def max_window_variation(path: np.ndarray, window: int) -> float:
    """Largest average step norm over any run of ``window`` consecutive steps."""
    d = step_norms(path)
    if window < 1 or window > d.size:
        raise ValueError(f"window must lie in [1, {d.size}]")
    c = np.concatenate([[0.0], np.cumsum(d)])
    return float(np.max(c[window:] - c[:-window]) / window)


@dataclass
class CaseStream:
    """Column-oriented synthetic stream; row ``k`` is case ``k``."""

    spec: StreamSpec
    a: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    V: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    inner: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.y.size

    def items(self) -> Iterator[tuple]:
        """Learner input: ``(phi, lower, upper, y)`` per case."""
        return iter_arrays(self.phi, self.spec.lower, self.spec.upper, self.y)

    def records(self) -> Iterator[CaseRecord]:
        for k in range(len(self)):
            yield CaseRecord(
                case_id=f"sim-{k:07d}",
                group=self.spec.group,
                a=float(self.a[k]),
                x=tuple(self.X[k]),
                z=tuple(self.Z[k]),
                v=tuple(self.V[k]),
                lower=self.spec.lower,
                upper=self.spec.upper,
                y=float(self.y[k]),
            )

    def oracle_predictions(self) -> np.ndarray:
        return np.clip(self.inner, self.spec.lower, self.spec.upper)


def gen_case_stream(spec: StreamSpec) -> CaseStream:
    feat_rng, noise_rng, drift_rng = _substreams(spec.seed)
    T = spec.T
    a = spec.a_law.sample(feat_rng, T)
    X = spec.count_law.sample(feat_rng, T)
    Z = (feat_rng.random((T, spec.m1)) < np.asarray(spec.z_probs)).astype(float)
    V = (feat_rng.random((T, spec.m2)) < np.asarray(spec.v_probs)).astype(float)
    phi = build_regressors(a, X, Z, V)
    theta0 = build_theta(spec.structural, spec.box_radius)
    theta = gen_parameter_path(theta0, spec.drift, T, drift_rng)
    inner = np.einsum("ij,ij->i", phi, theta)
    eps = spec.noise.sample(noise_rng, T)
    y = np.clip(inner + eps, spec.lower, spec.upper)
    return CaseStream(spec, a, X, Z, V, phi, theta, inner, y)


def steps_to_reach(adaptive: np.ndarray, oracle: np.ndarray, margin: float, window: int = 500) -> Optional[int]:
    """First step at which the trailing-window RA of ``adaptive`` relative
    errors comes within ``margin`` of the oracle's, or ``None``."""
    adaptive = np.asarray(adaptive, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    if adaptive.size < window:
        return None
    ca = np.concatenate([[0.0], np.cumsum(adaptive)])
    co = np.concatenate([[0.0], np.cumsum(oracle)])
    gap = ((ca[window:] - ca[:-window]) - (co[window:] - co[:-window])) / window
    hits = np.flatnonzero(gap <= margin)
    return int(hits[0]) + window if hits.size else None


@dataclass(frozen=True)
class ReplicationResult:
    seed: int
    ra: dict
    ra_steady: dict
    ra_oracle: float
    ra_oracle_steady: float
    bound: float
    theta_rel_error: dict
    steps_to_oracle: dict

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ra": dict(self.ra),
            "ra_steady": dict(self.ra_steady),
            "ra_oracle": self.ra_oracle,
            "ra_oracle_steady": self.ra_oracle_steady,
            "bound": self.bound,
            "theta_rel_error": dict(self.theta_rel_error),
            "steps_to_oracle": dict(self.steps_to_oracle),
        }


def _mean_std(values: Sequence[float]) -> tuple[float, Optional[float]]:
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else None
    return float(arr.mean()), std


@dataclass(frozen=True)
class ExperimentSummary:
    """Per-replication results with mean and sample standard deviation."""

    replications: tuple[ReplicationResult, ...]
    steady_fraction: float

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.replications]

    def stat(self, name: str, variant: Optional[str] = None) -> tuple[float, Optional[float]]:
        vals = []
        for r in self.replications:
            v = getattr(r, name)
            vals.append(v[variant] if variant is not None else v)
        return _mean_std(vals)

    def as_dict(self) -> dict:
        variants = list(self.replications[0].ra)
        out: dict = {"replications": len(self.replications), "seeds": self.seeds, "steady_fraction": self.steady_fraction}
        for name in ("ra", "ra_steady", "theta_rel_error"):
            out[name] = {}
            for v in variants:
                mean, std = self.stat(name, v)
                out[name][v] = {"mean": mean, "std": std}
        for name in ("ra_oracle", "ra_oracle_steady", "bound"):
            mean, std = self.stat(name)
            out[name] = {"mean": mean, "std": std}
        out["per_seed"] = [r.as_dict() for r in self.replications]
        return out


def run_replication(
    spec: StreamSpec,
    hp: Hyperparams,
    variants: Sequence[str] = ("mlms", "plain_lms"),
    steady_fraction: float = 0.2,
    reach_margin: float = 0.02,
    reach_window: int = 500,
) -> ReplicationResult:
    """Generate one stream and score every learner variant against the oracle."""
    stream = gen_case_stream(spec)
    T = len(stream)
    start = T - max(1, int(round(steady_fraction * T)))
    oracle = relative_accuracy(stream.y, stream.oracle_predictions())
    bound = theorem2_bound(stream.inner, spec.lower, spec.upper, stream.y, spec.noise)
    ra, ra_steady, theta_err, reach = {}, {}, {}, {}
    theta_final = stream.theta[-1]
    for variant in variants:
        report: RunReport = run_stream(stream.items(), spec.noise, hp, variant=variant)
        trace = relative_accuracy(*report.pairs())
        ra[variant] = trace.ra
        ra_steady[variant] = trace.window(start).ra
        theta_err[variant] = float(
            np.linalg.norm(report.final_state.theta_hat - theta_final) / np.linalg.norm(theta_final)
        )
        reach[variant] = steps_to_reach(trace.rel_err, oracle.rel_err, reach_margin, reach_window)
    return ReplicationResult(
        seed=spec.seed,
        ra=ra,
        ra_steady=ra_steady,
        ra_oracle=oracle.ra,
        ra_oracle_steady=oracle.window(start).ra,
        bound=bound,
        theta_rel_error=theta_err,
        steps_to_oracle=reach,
    )


def replication_seeds(base_seed: int, replications: int) -> list[int]:
    return [base_seed + i for i in range(replications)]


def run_experiment(
    spec: StreamSpec,
    hp: Hyperparams,
    replications: int = 1,
    seeds: Optional[Sequence[int]] = None,
    workers: int = 1,
    **kwargs,
) -> ExperimentSummary:
    """Run independent replications (one seed each) and summarize them.

    Results are ordered by replication index regardless of ``workers``.
    """
    if seeds is None:
        if replications < 1:
            raise ValueError("replications must be >= 1")
        seeds = replication_seeds(spec.seed, replications)
    specs = [replace(spec, seed=int(s)) for s in seeds]
    if not specs:
        raise ValueError("no seeds given")
    steady = kwargs.get("steady_fraction", 0.2)
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_replication, s, hp, **kwargs) for s in specs]
            results = tuple(f.result() for f in futures)
    else:
        results = tuple(run_replication(s, hp, **kwargs) for s in specs)
    return ExperimentSummary(results, steady)


def reference_spec(**overrides) -> StreamSpec:
    """Reference configuration used by the validation experiments.

    Two conviction features and one other feature; starting point 24 months.
    Bounds sit far from the bulk of the signal so the clamp rarely binds and
    the learner's cold start is not stuck in saturation.
    """
    base = dict(
        structural=StructuralParams(b=1.0, c=2.0, d=4.0, e=8.0, eta=0.05, p=(-0.15, 0.2), q=(0.1,)),
        T=100_000,
        seed=20240601,
        lower=1.0,
        upper=400.0,
        count_law=CountLaw(rates=(1.0, 0.7, 0.5, 0.3), cap=3),
        a_law=StartingPoint(24.0, 24.0),
        noise=GaussianNoiseModel(1.0),
        box_radius=50.0,
    )
    base.update(overrides)
    return StreamSpec(**base)


def sigma_for_snr(spec: StreamSpec, snr: float, pilot: int = 20_000) -> float:
    """Noise level giving ``std(phi @ theta) / sigma == snr`` on a pilot stream."""
    pilot_spec = replace(spec, T=pilot, drift=DriftSpec())
    return float(np.std(gen_case_stream(pilot_spec).inner) / snr)
