"""Projected momentum LMS for the clamped linear model.

Each step predicts ``clamp(phi @ theta_hat)``, then, once the outcome ``y`` is
seen, moves the estimate along the gradient of ``(y - G(phi @ theta_hat))**2``
(``G`` being the mean of the clamped observation) with a normalized step, adds
a momentum term and clips every component back into ``[-R, R]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from .errors import StreamError, ValidationError
from .noise import GaussianNoiseModel, sat_mean, sat_mean_deriv
from .sms_core import saturate


class TheoryRegimeWarning(UserWarning):
    """Hyperparameters are outside the range covered by the convergence theory."""


@dataclass(frozen=True)
class DecayingMomentum:
    """``beta_k = k**-delta``; ``beta_0`` is taken as 1."""

    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def beta(self, k: int) -> float:
        return 1.0 if k <= 1 else k ** (-self.delta)


@dataclass(frozen=True)
class ConstantMomentum:
    beta_value: float

    def __post_init__(self):
        if not 0 <= self.beta_value < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta_value}")

    def beta(self, k: int) -> float:
        return self.beta_value


Momentum = Union[DecayingMomentum, ConstantMomentum]


@dataclass(frozen=True)
class Hyperparams:
    """Learner settings.

    Parameters
    ----------
    mu : float
        Step size.  Values above 1 are accepted (they are used for the
        serious-injury preset) but trigger a :class:`TheoryRegimeWarning`.
    momentum : DecayingMomentum or ConstantMomentum
    box_radius : float
        Half-width of the projection box.
    gprime_floor : float or None
        Lower bound applied to ``G'`` inside the gradient so that deeply
        saturated steps do not stall completely.  ``None`` disables it.
    """

    mu: float
    momentum: Momentum = field(default_factory=lambda: ConstantMomentum(0.0))
    box_radius: float = 100.0
    gprime_floor: Optional[float] = 1e-12

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.box_radius > 0:
            raise ValueError(f"box_radius must be positive, got {self.box_radius}")
        if self.mu > 1:
            warnings.warn(
                f"mu={self.mu} > 1: outside the step-size range covered by the convergence analysis",
                TheoryRegimeWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class LearnerState:
    theta_hat: np.ndarray
    theta_hat_prev: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "LearnerState":
        return cls(np.zeros(dim), np.zeros(dim), 0)

    @property
    def dim(self) -> int:
        return self.theta_hat.size


def project_box(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : |x_i| <= radius}``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return np.clip(np.asarray(v, dtype=float), -radius, radius)


def _check_dim(state: LearnerState, phi: np.ndarray):
    if phi.shape != state.theta_hat.shape:
        raise ValueError(f"regressor has dimension {phi.size}, estimate has {state.dim}")


def predict(state: LearnerState, phi, lower: float, upper: float) -> float:
    phi = np.asarray(phi, dtype=float)
    _check_dim(state, phi)
    return saturate(float(phi @ state.theta_hat), lower, upper)


def update(
    state: LearnerState,
    phi,
    y_next: float,
    lower: float,
    upper: float,
    noise: GaussianNoiseModel,
    hp: Hyperparams,
) -> LearnerState:
    """One parameter update after observing ``y_next``."""
    phi = np.asarray(phi, dtype=float)
    _check_dim(state, phi)
    if not lower <= y_next <= upper:
        raise ValidationError(f"outcome {y_next} outside bounds [{lower}, {upper}]")
    th = state.theta_hat
    m = float(phi @ th)
    g_val = sat_mean(m, lower, upper, noise)
    g_der = sat_mean_deriv(m, lower, upper, noise)
    if hp.gprime_floor is not None and g_der < hp.gprime_floor:
        g_der = hp.gprime_floor
    alpha = hp.mu / (1.0 + float(phi @ phi))
    grad = -(y_next - g_val) * g_der * phi
    beta = hp.momentum.beta(state.step)
    new = th - alpha * grad + beta * (th - state.theta_hat_prev)
    return LearnerState(project_box(new, hp.box_radius), th, state.step + 1)


@dataclass
class RunReport:
    """Trajectory of one pass over a stream.

    ``y`` is NaN for prediction-only steps.  ``theta_norm[k]`` is the norm of
    the estimate that produced ``y_hat[k]``.
    """

    variant: str
    y: np.ndarray
    y_hat: np.ndarray
    theta_norm: np.ndarray
    final_state: LearnerState
    theta_history: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return int(np.sum(~np.isnan(self.y)))

    def pairs(self, start: int = 0, stop: Optional[int] = None):
        """(y, y_hat) arrays over steps with an observed outcome."""
        y = self.y[start:stop]
        yh = self.y_hat[start:stop]
        keep = ~np.isnan(y)
        return y[keep], yh[keep]


VARIANTS = ("mlms", "plain_lms")

StreamItem = tuple  # (phi, lower, upper, y or None)


def run_stream(
    stream: Iterable[StreamItem],
    noise: GaussianNoiseModel,
    hp: Hyperparams,
    variant: str = "mlms",
    record_theta: bool = False,
    state: Optional[LearnerState] = None,
) -> RunReport:
    """Predict-then-update over ``stream`` in order.

    ``plain_lms`` runs the same loop with the momentum coefficient fixed at 0.
    Items whose outcome is ``None`` or NaN are predicted but not learned from.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "plain_lms":
        hp = replace(hp, momentum=ConstantMomentum(0.0))
    ys, yhats, norms, history = [], [], [], []
    for k, (phi, lower, upper, y) in enumerate(stream):
        phi = np.asarray(phi, dtype=float)
        if state is None:
            state = LearnerState.zeros(phi.size)
        try:
            y_hat = predict(state, phi, lower, upper)
            ys.append(math.nan if y is None else float(y))
            yhats.append(y_hat)
            norms.append(float(np.linalg.norm(state.theta_hat)))
            if record_theta:
                history.append(state.theta_hat)
            if y is not None and not math.isnan(y):
                state = update(state, phi, float(y), lower, upper, noise, hp)
        except ValueError as exc:
            raise StreamError(str(exc), step=k) from exc
    if state is None:
        raise StreamError("stream is empty", step=0)
    return RunReport(
        variant=variant,
        y=np.array(ys),
        y_hat=np.array(yhats),
        theta_norm=np.array(norms),
        final_state=state,
        theta_history=np.array(history) if record_theta else None,
    )


def iter_arrays(phi: np.ndarray, lower, upper, y) -> Iterator[StreamItem]:
    """Stream items from column arrays (scalars broadcast for bounds)."""
    n = phi.shape[0]
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    y = np.asarray(y, dtype=float)
    for k in range(n):
        yield phi[k], float(lower[k]), float(upper[k]), float(y[k])
