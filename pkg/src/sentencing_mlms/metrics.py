"""Relative accuracy, the known-parameter predictor and its accuracy ceiling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .noise import GaussianNoiseModel, sat_abs_deviation


@dataclass(frozen=True)
class AccuracyTrace:
    """Per-step relative errors and the averaged relative accuracy.

    ``ra`` is ``None`` for an empty trace.
    """

    y: np.ndarray
    y_hat: np.ndarray
    rel_err: np.ndarray
    ra: Optional[float]

    @property
    def T(self) -> int:
        return int(self.rel_err.size)

    def running_ra(self) -> np.ndarray:
        """RA computed over the first ``t`` predictions, for ``t = 1..T``."""
        return 1.0 - np.cumsum(self.rel_err) / np.arange(1, self.T + 1)

    def window(self, start: int, stop: Optional[int] = None) -> "AccuracyTrace":
        return relative_accuracy(self.y[start:stop], self.y_hat[start:stop])


def _check_positive(y: np.ndarray):
    bad = np.flatnonzero(~(y > 0))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"outcome must be positive for relative accuracy, got {y[i]}", row=i)


def relative_accuracy(y: Sequence[float], y_hat: Sequence[float]) -> AccuracyTrace:
    """``1 - mean(|y - y_hat| / y)`` together with the per-step terms."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} outcomes, {y_hat.size} predictions")
    _check_positive(y)
    rel = np.abs(y - y_hat) / y
    ra = 1.0 - float(rel.mean()) if rel.size else None
    return AccuracyTrace(y, y_hat, rel, ra)


def oracle_predict(theta, phi, lower, upper):
    """Known-parameter predictor ``clamp(phi @ theta)``.

    ``phi`` may be a single regressor or an ``(n, p)`` matrix; ``theta`` a
    single vector or an ``(n, p)`` path.
    """
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != theta.shape[-1]:
        raise ValueError(f"regressor has dimension {phi.shape[-1]}, theta has {theta.shape[-1]}")
    inner = np.einsum("...i,...i->...", phi, theta)
    out = np.clip(inner, lower, upper)
    return float(out) if out.ndim == 0 else out


def theorem2_bound(inner, lower, upper, y, noise: GaussianNoiseModel) -> float:
    """Best attainable RA given the true pre-noise values ``inner = phi @ theta``.

    Realized outcomes ``y`` act only as fixed weights:
    ``1 - mean(E|clamp(inner + eps) - clamp(inner)| / y)``.
    """
    inner = np.asarray(inner, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if inner.shape != y.shape:
        raise ValueError("inner values and outcomes must have the same length")
    if not y.size:
        raise ValueError("empty stream")
    _check_positive(y)
    n = y.size
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    dev = sat_abs_deviation(inner, lower, upper, noise)
    return 1.0 - float(np.mean(dev / y))


def theorem2_bound_stream(phi, theta, lower, upper, y, noise: GaussianNoiseModel) -> float:
    """:func:`theorem2_bound` from regressors and a parameter (vector or path)."""
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    inner = np.einsum("...i,...i->...", np.asarray(phi, dtype=float), theta)
    return theorem2_bound(inner, lower, upper, y, noise)


def not_one_check(trace: AccuracyTrace, margin: float) -> bool:
    """True when the trace's RA stays at least ``margin`` below 1."""
    if trace.ra is None:
        return True
    return trace.ra <= 1.0 - margin
