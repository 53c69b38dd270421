"""Gaussian observation noise and the moments of a clamped Gaussian.

For ``Y = clamp(m + eps, L, U)`` with ``eps ~ N(0, sigma**2)`` this module
provides

* ``sat_mean``          E[Y] as a function of ``m``
* ``sat_mean_deriv``    d/dm E[Y] = P(L < m + eps < U)
* ``sat_abs_deviation`` E|Y - clamp(m)|, the per-step error of the
                        known-parameter predictor

All three accept scalar or array ``m``.  ``quadrature_oracle`` integrates an
arbitrary function against the noise density and is used as an independent
check on the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF = math.sqrt(0.5)


def _cdf(z: float) -> float:
    return 0.5 * math.erfc(-z * _SQRT_HALF)


def _pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT_2PI


def _between(lo: float, hi: float) -> float:
    if lo > 0:
        return _cdf(-lo) - _cdf(-hi)
    return _cdf(hi) - _cdf(lo)


def _is_scalar(*args) -> bool:
    return all(isinstance(a, (int, float)) for a in args)


def norm_cdf(z):
    return special.ndtr(z)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / _SQRT_2PI
    return out if out.ndim else float(out)


def _prob_between(lo, hi):
    """P(lo < Z < hi) for standard normal Z without upper-tail cancellation."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.where(lo > 0, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GaussianNoiseModel:
    """Zero-mean Gaussian noise with standard deviation ``sigma`` (months)."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be a positive finite number, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma**2

    @classmethod
    def from_variance(cls, variance: float) -> "GaussianNoiseModel":
        return cls(math.sqrt(variance))

    def pdf(self, x):
        return norm_pdf(np.asarray(x, dtype=float) / self.sigma) / self.sigma

    def cdf(self, x):
        return norm_cdf(np.asarray(x, dtype=float) / self.sigma)

    def density_floor(self, h: float) -> float:
        """inf of the density over ``|x| <= h`` (attained at the endpoints)."""
        return float(self.pdf(abs(h)))

    def sample(self, rng: np.random.Generator, size=None):
        return self.sigma * rng.standard_normal(size)


def _check_bounds(lower, upper):
    if _is_scalar(lower, upper):
        if not lower < upper:
            raise ValueError(f"lower must be < upper, got ({lower}, {upper})")
        return
    if not np.all(np.asarray(lower) < np.asarray(upper)):
        raise ValueError(f"lower must be < upper, got ({lower}, {upper})")


def _standardize(m, lower, upper, sigma):
    m = np.asarray(m, dtype=float)
    return m, (np.asarray(lower, dtype=float) - m) / sigma, (np.asarray(upper, dtype=float) - m) / sigma


def _ret(x):
    x = np.asarray(x)
    return x if x.ndim else float(x)


def _excess(d: float) -> float:
    """E[(Z - d)+] for standard normal Z."""
    return _pdf(d) - d * _cdf(-d)


def _excess_array(d):
    return norm_pdf(d) - d * special.ndtr(-d)


def sat_mean(m, lower, upper, noise: GaussianNoiseModel):
    """E[clamp(m + eps, lower, upper)].

    Evaluated as ``L + sigma*(h(zl) - h(zu))`` with ``h(d) = E[(Z - d)+]``
    when ``m`` is in the lower half of the range, and as the mirrored
    expression about ``U`` otherwise, so that deep in either tail the result
    approaches the bound without cancellation.
    """
    _check_bounds(lower, upper)
    s = noise.sigma
    if _is_scalar(m, lower, upper):
        zl, zu = (lower - m) / s, (upper - m) / s
        if 2.0 * m <= lower + upper:
            out = lower + s * (_excess(zl) - _excess(zu))
        else:
            out = upper - s * (_excess(-zu) - _excess(-zl))
        return min(upper, max(lower, out))
    m, zl, zu = _standardize(m, lower, upper, s)
    low_form = lower + s * (_excess_array(zl) - _excess_array(zu))
    high_form = upper - s * (_excess_array(-zu) - _excess_array(-zl))
    out = np.where(2.0 * m <= lower + upper, low_form, high_form)
    return _ret(np.clip(out, lower, upper))


def sat_mean_deriv(m, lower, upper, noise: GaussianNoiseModel):
    """Derivative of :func:`sat_mean` with respect to ``m``."""
    _check_bounds(lower, upper)
    s = noise.sigma
    if _is_scalar(m, lower, upper):
        return _between((lower - m) / s, (upper - m) / s)
    _, zl, zu = _standardize(m, lower, upper, s)
    return _prob_between(zl, zu)


def sat_abs_deviation(m, lower, upper, noise: GaussianNoiseModel):
    """E|clamp(m + eps) - clamp(m)| for Gaussian ``eps``.

    With ``c = clamp(m)`` the expectation splits into the two clamped tails
    plus a folded-Gaussian piece on ``(lower, upper)``::

        (U - c) Q(zu) + (c - L) Phi(zl)
          + (c - m) [2 Phi(zc) - Phi(zu) - Phi(zl)]
          + sigma  [2 phi(zc) - phi(zu) - phi(zl)]
    """
    _check_bounds(lower, upper)
    s = noise.sigma
    if _is_scalar(m, lower, upper):
        c = min(upper, max(lower, m))
        zl, zu, zc = (lower - m) / s, (upper - m) / s, (c - m) / s
        out = (
            (upper - c) * _cdf(-zu)
            + (c - lower) * _cdf(zl)
            + (c - m) * (_between(zl, zc) - _between(zc, zu))
            + s * (2.0 * _pdf(zc) - _pdf(zu) - _pdf(zl))
        )
        return max(out, 0.0)
    m, zl, zu = _standardize(m, lower, upper, s)
    c = np.clip(m, lower, upper)
    zc = (c - m) / s
    out = (
        (upper - c) * special.ndtr(-zu)
        + (c - lower) * special.ndtr(zl)
        + (c - m) * (_prob_between(zl, zc) - _prob_between(zc, zu))
        + s * (2.0 * norm_pdf(zc) - norm_pdf(zu) - norm_pdf(zl))
    )
    return _ret(np.maximum(out, 0.0))


def quadrature_oracle(
    f: Callable[[float], float],
    noise: GaussianNoiseModel,
    lo_sigmas: float = 12.0,
    hi_sigmas: float = 12.0,
    points: Iterable[float] = (),
    epsabs: float = 1e-10,
) -> float:
    """Integrate ``f(x) * density(x)`` over ``[-lo_sigmas*sigma, hi_sigmas*sigma]``.

    ``points`` are abscissae where ``f`` has kinks; the range is split there
    so each adaptive Gauss-Kronrod piece sees a smooth integrand.
    """
    if lo_sigmas < 10 or hi_sigmas < 10:
        raise ValueError("integration range must cover at least 10 standard deviations each side")
    a, b = -lo_sigmas * noise.sigma, hi_sigmas * noise.sigma
    cuts = sorted({a, b, *(p for p in points if a < p < b)})
    pdf = noise.pdf
    total = 0.0
    tol = epsabs / max(1, len(cuts) - 1)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, err, info = integrate.quad(
            lambda x: f(x) * pdf(x), lo, hi, epsabs=tol, epsrel=1e-13, limit=500, full_output=1
        )[:3]
        if err > tol:
            raise QuadratureError(
                f"quadrature on [{lo:.6g}, {hi:.6g}] did not converge: estimated error {err:.3g} > {tol:.3g}"
            )
        total += val
    return total


def sat_kinks(m: float, lower: float, upper: float) -> tuple[float, float]:
    """Noise values where ``clamp(m + x)`` changes slope."""
    return (lower - m, upper - m)


def fit_sigma(residuals: Sequence[float]) -> GaussianNoiseModel:
    """Noise model whose ``sigma`` is the root mean square of ``residuals``."""
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 2:
        raise ValueError("need at least 2 residuals to estimate sigma")
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals must be finite")
    sigma = float(np.sqrt(np.mean(r * r)))
    if sigma == 0.0:
        raise ValueError("all residuals are zero; sigma must be positive")
    return GaussianNoiseModel(sigma)
