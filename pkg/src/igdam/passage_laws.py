"""First-passage laws of the two phases of a control cycle.

Fill phase: with the release off, content climbs as ``x + I_t`` and
``W_lam`` is the first time it reaches the upper threshold.  Because paths
are increasing, ``{W_lam <= t} = {I_t >= lam - x}`` and the passage
distribution function is the increment upper tail; the Laplace transform
``E_x exp(-a W_lam)`` and the mean have closed forms in the error-function
family.

Release phase: with the release on at rate ``M``, content moves as
``x + I_t - M t`` and ``W_star`` is the first hit of the lower threshold
(hit exactly, since drainage is continuous and jumps go up).  Its
transform is ``exp(-(x - tau) eta(a))`` where ``eta`` solves
``M eta = a + psi(eta)``; passage is certain iff ``mu M > 1``, and mean
and variance are finite exactly then.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ig_core import IGParams, erfc, ig_sf, normal_pdf, erf, _exp_erfc

__all__ = [
    "Policy",
    "eta",
    "lt_w_lambda",
    "cdf_w_lambda",
    "cdf_w_lambda_printed_form",
    "mean_w_lambda",
    "lt_w_tau_star",
    "prob_w_tau_star_finite",
    "pdf_w_tau_star",
    "mean_var_w_tau_star",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Policy:
    """Two-threshold control triple: release switches 0 -> M when content
    up-crosses ``lam`` and M -> 0 when it drains down to ``tau``."""

    lam: float
    tau: float
    M: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.lam, self.tau, self.M)):
            raise DomainError("policy parameters must be finite")
        if not (0.0 <= self.tau < self.lam):
            raise DomainError(
                f"thresholds must satisfy 0 <= tau < lam, got tau={self.tau!r} lam={self.lam!r}"
            )
        if self.M <= 0.0:
            raise DomainError(f"release rate must be > 0, got {self.M!r}")

    @property
    def gap(self) -> float:
        return self.lam - self.tau


def eta(params: IGParams, M: float, alpha):
    """Exponent of the release-phase passage transform.

    The increasing root of ``M eta = alpha + psi(eta)``:

        eta(alpha) = alpha/M + [(1 - M mu) + sqrt(2 alpha M sigma^2 + (1 - M mu)^2)] / (M^2 sigma^2)

    eta(0) = 0 iff ``M mu > 1``; otherwise eta(0) = 2 (1 - M mu) / (M^2 sigma^2) > 0.
    """
    if M <= 0.0:
        raise DomainError("release rate must be > 0")
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0.0) or not np.all(np.isfinite(alpha)):
        raise DomainError("discount rate must be finite and >= 0")
    one_minus = 1.0 - M * params.mu
    root = np.sqrt(2.0 * alpha * M * params.sigma2 + one_minus**2)
    out = alpha / M + (one_minus + root) / (M * M * params.sigma2)
    # exact zero at alpha=0 in the supercritical regime instead of rounding noise
    out = np.where((alpha == 0.0) & (one_minus < 0.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def _check_fill_args(x: float, lam: float) -> float:
    if not (math.isfinite(x) and math.isfinite(lam)):
        raise DomainError("start level and threshold must be finite")
    if x > lam:
        raise DomainError(f"fill phase requires start <= threshold, got x={x!r} > lam={lam!r}")
    return lam - x


def lt_w_lambda(params: IGParams, x: float, lam: float, alpha: float) -> float:
    """E_x exp(-alpha W_lam), the fill-phase passage transform.

    Closed form with h = lam - x, evaluated through erfc_scaled so the
    exponential prefactor never overflows:

        (a s2 - mu)/(a s2 - 2 mu) e^{a h (a s2/2 - mu)} erfc(sqrt(h) (a s2 - mu)/sqrt(2 s2))
        - mu/(a s2 - 2 mu) erfc(sqrt(h) mu / sqrt(2 s2))

    The denominator vanishes at alpha = 2 mu / sigma^2 where the transform
    itself is smooth; that removable point is evaluated as the average of
    the two values at alpha (1 +/- 1e-6).
    """
    h = _check_fill_args(x, lam)
    if not math.isfinite(alpha) or alpha < 0.0:
        raise DomainError("discount rate must be finite and >= 0")
    if h == 0.0:
        return 1.0
    mu, s2 = params.mu, params.sigma2
    denom = alpha * s2 - 2.0 * mu
    if abs(denom) < 1e-8 * 2.0 * mu:
        d = max(1e-6 * alpha, 1e-12)
        return 0.5 * (
            lt_w_lambda(params, x, lam, alpha + d) + lt_w_lambda(params, x, lam, alpha - d)
        )
    num = alpha * s2 - mu
    t1 = (num / denom) * float(
        _exp_erfc(alpha * h * (alpha * s2 / 2.0 - mu), math.sqrt(h) * num / math.sqrt(2.0 * s2))
    )
    t2 = -(mu / denom) * float(erfc(math.sqrt(h) * mu / math.sqrt(2.0 * s2)))
    return t1 + t2


def cdf_w_lambda(params: IGParams, x: float, lam: float, t) -> float:
    """P_x(W_lam <= t): increasing paths make this P(I_t >= lam - x)."""
    h = _check_fill_args(x, lam)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or not np.all(np.isfinite(t_arr)):
        raise DomainError("time must be finite and >= 0")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti == 0.0:
            out[i] = 1.0 if h == 0.0 else 0.0
        else:
            out[i] = 1.0 if h == 0.0 else ig_sf(params, float(ti), h)
    return float(out[0]) if scalar else out


def cdf_w_lambda_printed_form(params: IGParams, x: float, lam: float, t) -> float:
    """Erfc form of the passage distribution *without* the sqrt(lam - x)
    scaling inside the arguments.

    Kept only as a comparison target: it coincides with
    :func:`cdf_w_lambda` exactly when ``lam - x == 1`` and deviates
    otherwise (see the passage-law tests, which pin the discrepancy).
    Computed in the same overflow-safe fashion as the identity form.
    """
    h = _check_fill_args(x, lam)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    mu, s2 = params.mu, params.sigma2
    a1 = (h * mu - t_arr) / math.sqrt(2.0 * s2)
    a2 = (h * mu + t_arr) / math.sqrt(2.0 * s2)
    out = 0.5 * erfc(a1) - 0.5 * _exp_erfc(2.0 * mu * t_arr / s2, a2)
    return float(out[0]) if np.asarray(t).ndim == 0 else out


def mean_w_lambda(params: IGParams, x: float, lam: float) -> float:
    """E_x W_lam in closed form; equals the occupation integral of the
    undiscounted resolvent density over (0, lam - x]:

        h mu/2 + sigma sqrt(h) phi(sqrt(h) mu/sigma)
        + (h mu^2 + sigma^2)/(2 mu) * erf(sqrt(h/2) mu/sigma)
    """
    h = _check_fill_args(x, lam)
    if h == 0.0:
        return 0.0
    mu, s = params.mu, params.sigma
    rt = math.sqrt(h)
    return (
        h * mu / 2.0
        + s * rt * float(normal_pdf(rt * mu / s))
        + (h * mu * mu + s * s) / (2.0 * mu) * float(erf(math.sqrt(h / 2.0) * mu / s))
    )


def _check_release_args(x: float, tau: float) -> float:
    if not (math.isfinite(x) and math.isfinite(tau)):
        raise DomainError("start level and threshold must be finite")
    if x < tau:
        raise DomainError(f"release phase requires start >= threshold, got x={x!r} < tau={tau!r}")
    return x - tau


def lt_w_tau_star(params: IGParams, M: float, x: float, tau: float, alpha: float) -> float:
    """E_x exp(-alpha W_star) = exp(-(x - tau) eta(alpha)).

    At alpha = 0 this is the finiteness probability of the release phase.
    """
    h = _check_release_args(x, tau)
    return math.exp(-h * float(eta(params, M, alpha)))


def prob_w_tau_star_finite(params: IGParams, M: float, x: float, tau: float) -> float:
    """P_x(W_star < infinity): 1 if mu M > 1, else exp(-2 h (1 - mu M)/(M^2 sigma^2))."""
    return lt_w_tau_star(params, M, x, tau, 0.0)


def pdf_w_tau_star(params: IGParams, M: float, x: float, tau: float, t):
    """Density of the release-phase passage time.

    Zero before the deterministic drain bound (x - tau)/M; afterwards

        (x - tau) / (sigma sqrt(2 pi (M t - (x - tau))^3))
        * exp(-((M mu - 1) t - mu (x - tau))^2 / (2 (M t - (x - tau)) sigma^2)).

    Integrates over t to the finiteness probability (defective when
    mu M <= 1).
    """
    h = _check_release_args(x, tau)
    if M <= 0.0:
        raise DomainError("release rate must be > 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or not np.all(np.isfinite(t_arr)):
        raise DomainError("time must be finite and >= 0")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    out = np.zeros_like(t_arr)
    z = M * t_arr - h
    m = z > 0.0
    if h == 0.0:
        # instantaneous hit: the law is a point mass at 0, density 0 elsewhere
        return 0.0 if scalar else out
    num = (M * params.mu - 1.0) * t_arr[m] - params.mu * h
    out[m] = (
        h / (params.sigma * np.sqrt(2.0 * math.pi * z[m] ** 3))
        * np.exp(-(num * num) / (2.0 * z[m] * params.sigma2))
    )
    return float(out[0]) if scalar else out


def mean_var_w_tau_star(params: IGParams, M: float, x: float, tau: float) -> tuple[float, float]:
    """(mean, variance) of the release-phase passage time.

    Finite iff ``mu M > 1``; the subcritical regime returns
    ``(inf, inf)`` as an explicit value rather than raising, so policy
    search can treat the region as infeasible.

        mean = (x - tau) mu / (mu M - 1)
        var  = (x - tau) sigma^2 / (mu M - 1)^3

    The variance follows both from -d^2/dalpha^2 of the passage transform
    at 0 and from the exact representation W_star = (Z + x - tau)/M with Z
    inverse Gaussian; quadrature of the density and simulation agree.
    """
    h = _check_release_args(x, tau)
    if M <= 0.0:
        raise DomainError("release rate must be > 0")
    if h == 0.0:
        return (0.0, 0.0)
    drift = params.mu * M - 1.0
    if drift <= 0.0:
        return (math.inf, math.inf)
    return (h * params.mu / drift, h * params.sigma2 / drift**3)
