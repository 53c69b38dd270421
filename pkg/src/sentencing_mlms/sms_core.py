"""Structural sentencing model and its exact linear-in-parameters form.

The structural model predicts a sentence (in months) as

    (a + b*x1 + c*x2 + d*x3 + e*x4) * prod_i(1 + p_i*z_i) * (1 + sum_j q_j*v_j + eta)

clamped to the statutory interval ``[lower, upper]``.  Expanding the product
gives ``phi @ theta`` where ``phi`` depends only on the case and ``theta``
only on the structural weights.

Layout of ``phi`` (and ``theta``): five blocks, one per multiplier
``(a, x1, x2, x3, x4)``.  Each block is ``[mult * phi1, mult * kron(v, phi1)]``
where ``phi1`` holds the ``2**m1`` subset products of ``z`` ordered by subset
size, then lexicographically by member indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MAX_CONVICTION_FEATURES = 16
N_INJURY_LEVELS = 4
GROUPS = ("serious", "minor", "custom")


def regressor_dim(m1: int, m2: int) -> int:
    """Length of the regressor for ``m1`` conviction and ``m2`` other features."""
    return 5 * (2**m1) * (1 + m2)


@lru_cache(maxsize=None)
def subset_index(m1: int) -> tuple[tuple[int, ...], ...]:
    """All subsets of ``range(m1)``, size-ascending then lexicographic."""
    if m1 < 0:
        raise ValueError("m1 must be non-negative")
    if m1 > MAX_CONVICTION_FEATURES:
        raise CapacityError(
            f"m1={m1} exceeds the supported maximum of {MAX_CONVICTION_FEATURES} "
            f"(basis would have 2**{m1} entries)"
        )
    out: list[tuple[int, ...]] = []
    for size in range(m1 + 1):
        out.extend(combinations(range(m1), size))
    return tuple(out)


def expand_conviction_basis(z: Sequence[float]) -> np.ndarray:
    """Return the ``2**len(z)`` subset products of ``z``.

    The empty subset contributes 1.  The same expansion applied to the weights
    ``p`` gives the matching parameter block, so that
    ``prod(1 + p_i z_i) == expand(p) @ expand(z)``.
    """
    z = np.asarray(z, dtype=float).ravel()
    subsets = subset_index(z.size)
    return np.array([math.prod(z[list(s)]) if s else 1.0 for s in subsets])


def expand_conviction_basis_batch(Z: np.ndarray) -> np.ndarray:
    """Row-wise :func:`expand_conviction_basis` for an ``(n, m1)`` array."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("expected a 2-D array")
    subsets = subset_index(Z.shape[1])
    out = np.ones((Z.shape[0], len(subsets)))
    for col, s in enumerate(subsets):
        if s:
            out[:, col] = np.prod(Z[:, list(s)], axis=1)
    return out


@dataclass(frozen=True)
class CaseRecord:
    """One observed (or to-be-predicted) case.

    ``x`` holds victim counts for slight, minor, serious and fatal injuries.
    ``y`` may be ``None`` when the sentence is unknown.
    """

    case_id: str
    a: float
    x: tuple[float, ...]
    z: tuple[float, ...]
    v: tuple[float, ...]
    lower: float
    upper: float
    y: float | None = None
    group: str = "custom"
    strict_binary: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(t) for t in self.x))
        object.__setattr__(self, "z", tuple(float(t) for t in self.z))
        object.__setattr__(self, "v", tuple(float(t) for t in self.v))
        if self.group not in GROUPS:
            raise ValidationError(f"unknown group {self.group!r}", column="group")
        if len(self.x) != N_INJURY_LEVELS:
            raise ValidationError(f"expected {N_INJURY_LEVELS} victim counts, got {len(self.x)}")
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ValidationError(f"starting point must be >= 0, got {self.a}", column="a")
        for i, xi in enumerate(self.x, start=1):
            if xi < 0 or xi != int(xi):
                raise ValidationError(f"victim count must be a non-negative integer, got {xi}", column=f"x{i}")
        if self.strict_binary:
            for name, vec in (("z", self.z), ("v", self.v)):
                for i, t in enumerate(vec, start=1):
                    if t not in (0.0, 1.0):
                        raise ValidationError(f"feature must be 0 or 1, got {t:g}", column=f"{name}_{i}")
        if not (0 < self.lower < self.upper):
            raise ValidationError(f"bounds must satisfy 0 < lower < upper, got ({self.lower}, {self.upper})")
        if self.y is not None and not (self.lower <= self.y <= self.upper):
            raise ValidationError(
                f"sentence {self.y} outside bounds [{self.lower}, {self.upper}]", column="y"
            )

    @property
    def m1(self) -> int:
        return len(self.z)

    @property
    def m2(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class StructuralParams:
    """Weights of the structural model (victim weights, bias, feature weights)."""

    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 0.0
    eta: float = 0.0
    p: tuple[float, ...] = ()
    q: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(t) for t in self.p))
        object.__setattr__(self, "q", tuple(float(t) for t in self.q))

    @property
    def m1(self) -> int:
        return len(self.p)

    @property
    def m2(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class ThetaVector:
    """Linearized parameter vector with the half-width of its bounding box."""

    values: np.ndarray
    box_radius: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.box_radius > 0:
            raise ValueError("box_radius must be positive")
        outside = np.flatnonzero(np.abs(values) > self.box_radius)
        if outside.size:
            i = int(outside[0])
            raise ValidationError(
                f"theta[{i}] = {values[i]:.6g} lies outside the box |theta_i| <= {self.box_radius:g}"
            )

    def __len__(self):
        return self.values.size


def _blocks(multipliers: Sequence[float], head: np.ndarray, tail: np.ndarray) -> np.ndarray:
    return np.concatenate([np.concatenate([m * head, m * tail]) for m in multipliers])


def build_regressor(rec: CaseRecord) -> np.ndarray:
    """Regressor ``phi`` for one case (see module docstring for the layout)."""
    phi1 = expand_conviction_basis(rec.z)
    cross = np.kron(np.asarray(rec.v, dtype=float), phi1)
    return _blocks((rec.a, *rec.x), phi1, cross)


def build_regressors(a, X, Z, V) -> np.ndarray:
    """Vectorized :func:`build_regressor` for ``n`` cases.

    ``a`` has shape ``(n,)``, ``X`` ``(n, 4)``, ``Z`` ``(n, m1)``, ``V`` ``(n, m2)``.
    """
    a = np.asarray(a, dtype=float)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    V = np.asarray(V, dtype=float)
    n = a.shape[0]
    phi1 = expand_conviction_basis_batch(Z)
    cross = (V[:, :, None] * phi1[:, None, :]).reshape(n, -1)
    unit = np.concatenate([phi1, cross], axis=1)
    mults = np.column_stack([a, X])
    return (mults[:, :, None] * unit[:, None, :]).reshape(n, -1)


def build_theta(sp: StructuralParams, box_radius: float) -> ThetaVector:
    """Map structural weights to the linearized parameter vector."""
    vartheta1 = expand_conviction_basis(sp.p)
    cross = np.kron(np.asarray(sp.q, dtype=float), vartheta1)
    blocks = []
    for mult in (1.0, sp.b, sp.c, sp.d, sp.e):
        blocks.append(mult * (1.0 + sp.eta) * vartheta1)
        blocks.append(mult * cross)
    return ThetaVector(np.concatenate(blocks), box_radius)


def saturate(x, lower: float, upper: float):
    """Clamp ``x`` to ``[lower, upper]``; works on scalars and arrays."""
    if not lower < upper:
        raise ValueError(f"lower must be < upper, got ({lower}, {upper})")
    if np.ndim(x) == 0:
        return min(upper, max(lower, float(x)))
    return np.clip(x, lower, upper)


def sms_inner(sp: StructuralParams, rec: CaseRecord) -> float:
    """Pre-noise, pre-clamp value of the structural model."""
    if sp.m1 != rec.m1 or sp.m2 != rec.m2:
        raise ValueError(f"feature dimensions differ: params ({sp.m1}, {sp.m2}), record ({rec.m1}, {rec.m2})")
    baseline = rec.a + sp.b * rec.x[0] + sp.c * rec.x[1] + sp.d * rec.x[2] + sp.e * rec.x[3]
    conviction = math.prod(1.0 + p * z for p, z in zip(sp.p, rec.z))
    other = 1.0 + sum(q * v for q, v in zip(sp.q, rec.v)) + sp.eta
    return baseline * conviction * other


def sms_generate(sp: StructuralParams, rec: CaseRecord, eps: float) -> float:
    """Observed sentence for noise draw ``eps``."""
    return saturate(sms_inner(sp, rec) + eps, rec.lower, rec.upper)
