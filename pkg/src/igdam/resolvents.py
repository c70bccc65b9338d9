"""Resolvent calculus for the content process.

Free resolvent: the discounted occupation measure of the input process has
the density

    u_a(y) = (sigma/sqrt y) phi(sqrt y mu/sigma)
             + (mu - a sigma^2)/2 * e^{a y (a sigma^2/2 - mu)} erfc(sqrt y (a sigma^2 - mu)/sqrt(2 sigma^2))

whose Laplace transform is sigma^2 / (a sigma^2 + sqrt(2 b sigma^2 + mu^2) - mu)
= 1/(a + psi(b)).  That transform identity is the module's keystone test:
nothing downstream is trusted until quadrature of e^{-b y} u_a(y)
reproduces it.  All erfc products are routed through the scaled form so
large levels or discounts cannot overflow.

Release-phase (killed) resolvent: during drainage the content is
``x + I_t - M t`` killed at the lower threshold; its discounted occupation
kernel is

    U*_a(dy - x) = [q_a(y - x) - e^{-(x - tau) eta(a)} q_a(y - tau)] dy,
    q_a(z) = integral_0^inf e^{-a t} p(t, z + M t) dt,

computed by adaptive quadrature over t (the integrand starts at
t = max(0, -z/M) and decays exponentially provided a > 0 or mu M > 1).
A cubic-spline tabulation of q_a backs the repeated integrals in the cost
model; the scalar path stays exact for tests and spot checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DivergenceError, DomainError
from .ig_core import IGParams, _exp_erfc, normal_pdf
from .passage_laws import Policy, eta
from .quadrature import (
    DEFAULT_QUAD,
    QuadConfig,
    exponential_cutoff,
    gauss_legendre,
    integrate_adaptive,
    integrate_exponential_tail,
)

__all__ = ["ResolventDensity", "KilledResolvent", "ReleaseKernel"]


@dataclass(frozen=True)
class ResolventDensity:
    """Discounted occupation density ``u_alpha`` of the free input process.

    Positive on (0, inf) with an integrable 1/sqrt(y) singularity at 0;
    integrals against it substitute y = w^2 to keep quadrature fast.
    """

    params: IGParams
    alpha: float
    quad: QuadConfig = field(default=DEFAULT_QUAD)

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha) or self.alpha < 0.0:
            raise DomainError(f"discount rate must be finite and >= 0, got {self.alpha!r}")

    # closed-form building blocks ------------------------------------
    def _coef(self) -> tuple[float, float, float]:
        mu, s2 = self.params.mu, self.params.sigma2
        a = self.alpha
        C = (mu - a * s2) / 2.0
        A = a * (a * s2 / 2.0 - mu)
        d = (a * s2 - mu) / math.sqrt(2.0 * s2)
        return C, A, d

    def density(self, y):
        """u_alpha(y); domain y > 0."""
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
            raise DomainError("resolvent density requires y > 0")
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        mu, s = self.params.mu, self.params.sigma
        C, A, d = self._coef()
        ry = np.sqrt(y)
        out = s / ry * normal_pdf(ry * mu / s) + C * _exp_erfc(A * y, d * ry)
        return float(out[0]) if scalar else out

    def density_prime(self, y):
        """d/dy u_alpha(y), analytic.

        Blows up like y^(-3/2) as y -> 0+; at alpha = 0 the pieces collapse
        to -(sigma / (2 y^(3/2))) phi(sqrt(y) mu / sigma).
        """
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
            raise DomainError("resolvent density derivative requires y > 0")
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        mu, s, s2 = self.params.mu, self.params.sigma, self.params.sigma2
        a = self.alpha
        C, A, d = self._coef()
        ry = np.sqrt(y)
        ph = normal_pdf(ry * mu / s)
        out = -s * ph * (0.5 / (y * ry) + mu * mu / (2.0 * s2 * ry))
        out = out + (a * s2 - mu) ** 2 / (2.0 * s) * ph / ry
        if a != 0.0:
            out = out + C * A * _exp_erfc(A * y, d * ry)
        return float(out[0]) if scalar else out

    def density_sqrt_sub(self, w):
        """u_alpha(w^2) * 2w, the integrand after the y = w^2 substitution.

        Smooth through w = 0, where it tends to 2 sigma phi(0).
        """
        w = np.atleast_1d(np.asarray(w, dtype=float))
        mu, s = self.params.mu, self.params.sigma
        C, A, d = self._coef()
        return 2.0 * s * normal_pdf(w * mu / s) + 2.0 * w * C * _exp_erfc(A * w * w, d * w)

    def laplace(self, beta: float) -> float:
        """Closed-form transform: integral of e^{-beta y} u_alpha(y) dy over (0, inf)."""
        if beta < 0.0:
            raise DomainError("transform argument must be >= 0")
        mu, s2 = self.params.mu, self.params.sigma2
        denom = self.alpha * s2 + math.sqrt(2.0 * beta * s2 + mu * mu) - mu
        if denom <= 0.0:
            raise DivergenceError("resolvent transform diverges at alpha = beta = 0")
        return s2 / denom

    # integrals --------------------------------------------------------
    def integrate_penalty(
        self,
        g: Callable[[np.ndarray], np.ndarray],
        lo: float,
        hi: float,
        points: Sequence[float] | None = None,
    ) -> float:
        """Discounted occupation value of ``g`` on the fill phase:
        integral_0^(hi-lo) g(lo + y) u_alpha(y) dy, started at ``lo``.

        ``g`` must be bounded on [lo, hi]; knots can be passed via
        ``points`` (in content coordinates) to guide the adaptor.
        The endpoint singularity is removed by y = w^2.
        """
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise DomainError("integration limits must be finite with lo <= hi")
        if lo == hi:
            return 0.0
        w_hi = math.sqrt(hi - lo)
        w_pts = None
        if points:
            w_pts = [math.sqrt(p - lo) for p in points if lo < p < hi]

        def integrand(w: float) -> float:
            return float(g(np.asarray(lo + w * w)) * self.density_sqrt_sub(w)[0])

        return integrate_adaptive(integrand, 0.0, w_hi, self.quad, points=w_pts)

    def tail_integral(self, h: float, weight: float = 0.0) -> float:
        """integral_h^inf e^{-weight y} u_alpha(y) dy for h >= 0.

        Needs weight > 0 when alpha = 0 (the density tends to mu at
        infinity); with alpha > 0 the density itself decays at rate
        |alpha (alpha sigma^2 / 2 - mu)| and weight may be 0.
        """
        if h < 0.0 or weight < 0.0:
            raise DomainError("tail integral requires h >= 0 and weight >= 0")
        mu, s2 = self.params.mu, self.params.sigma2
        _, A, _ = self._coef()
        # u_alpha decays like e^{A y} while the erfc factor is order one
        # (alpha <= mu/sigma^2) and like e^{-mu^2 y / (2 sigma^2)} once the
        # erfc argument turns positive
        branch = mu * mu / (2.0 * s2)
        if self.alpha == 0.0:
            u_rate = 0.0
        elif self.alpha * s2 > mu:
            u_rate = branch
        else:
            u_rate = min(-A, branch)
        rate = weight + u_rate
        if rate <= 0.0:
            raise DivergenceError("undiscounted resolvent mass over an infinite range diverges")
        scale = max(mu, 1.0)

        if h == 0.0:
            # split off the 1/sqrt(y) singularity with the w-substitution
            def integrand_w(w: float) -> float:
                return float(np.exp(-weight * w * w) * self.density_sqrt_sub(w)[0])

            head = integrate_adaptive(integrand_w, 0.0, 1.0, self.quad)
            tail = integrate_exponential_tail(
                lambda y: math.exp(-weight * y) * float(self.density(y)),
                1.0, rate, scale, self.quad,
            )
            return head + tail

        return integrate_exponential_tail(
            lambda y: math.exp(-weight * y) * float(self.density(y)),
            h, rate, scale * math.exp(-weight * h), self.quad,
        )


class ReleaseKernel:
    """The drift kernel q_alpha(z) = integral e^{-alpha t} p(t, z + M t) dt.

    Depends on the input law, the release rate and the discount only, so a
    single instance (and its spline tabulation) is shared across every
    policy evaluated by the optimizer.  ``alpha = 0`` requires ``mu M > 1``.

    The t-integrand starts at t0 = max(0, -z/M), carries an integrable
    1/sqrt(t - t0) singularity when z ~ 0, and for z < 0 peaks around
    t0 mu M/(mu M - 1); the substitution t = t0 + r^2 plus clustered
    Gauss-Legendre panels resolves all of it in one vectorized pass
    (validated against fine-grid reference quadrature in the tests).
    """

    _PANELS = 40
    _NODES = 24

    def __init__(
        self, params: IGParams, M: float, alpha: float, quad: QuadConfig = DEFAULT_QUAD
    ) -> None:
        if M <= 0.0 or not math.isfinite(M):
            raise DomainError(f"release rate must be finite and > 0, got {M!r}")
        if alpha < 0.0 or not math.isfinite(alpha):
            raise DomainError("discount rate must be finite and >= 0")
        if alpha == 0.0 and params.mu * M <= 1.0:
            raise DivergenceError(
                f"undiscounted release kernel diverges when mu M <= 1 (mu M = {params.mu * M})"
            )
        self.params = params
        self.M = M
        self.alpha = alpha
        self.quad = quad
        self._spline: CubicSpline | None = None
        self._spline_range: tuple[float, float] = (0.0, 0.0)
        self._eta = float(eta(params, M, alpha))
        # occupation below the start is exact: strong Markov at the first
        # (continuous) down-crossing gives q(v) = e^{eta v} q(0-), and the
        # residue of the two-sided transform at theta = eta identifies
        # q(0-) = 1 / (M - psi'(eta))
        psi_prime = 1.0 / math.sqrt(2.0 * self._eta * params.sigma2 + params.mu**2)
        self._plateau = 1.0 / (M - psi_prime)

    # decay rates ------------------------------------------------------
    def time_decay_rate(self) -> float:
        """Asymptotic decay rate of the t-integrand: the discount plus the
        Gaussian envelope rate (mu M - 1)^2 / (2 M sigma^2)."""
        drift = self.params.mu * self.M - 1.0
        return self.alpha + (drift * drift) / (2.0 * self.M * self.params.sigma2)

    def level_decay_rate(self) -> float:
        """Decay rate of q_alpha(z) as z -> +inf.

        Governed by the negative root of M theta = alpha + psi(theta)
        (the mirror of the passage exponent) capped by the branch point
        mu^2 / (2 sigma^2) of the Laplace exponent.
        """
        mu, s2, M = self.params.mu, self.params.sigma2, self.M
        one_minus = 1.0 - M * mu
        root = math.sqrt(2.0 * self.alpha * M * s2 + one_minus * one_minus)
        theta_minus = self.alpha / M + (one_minus - root) / (M * M * s2)
        branch = mu * mu / (2.0 * s2)
        rate = min(-theta_minus, branch) if theta_minus < 0.0 else branch
        if rate <= 0.0:
            raise DivergenceError("release kernel has no level decay (mu M <= 1, alpha = 0)")
        return rate

    # evaluation ---------------------------------------------------------
    def _t_span(self, t0: float) -> float:
        rate = self.time_decay_rate()
        span = math.log(1e16) / rate
        drift = self.params.mu * self.M - 1.0
        if drift > 0.0 and t0 > 0.0:
            center = t0 / drift
            span = max(span, 2.0 * center + 12.0 * math.sqrt(center + 1.0))
        return span

    def density(self, z) -> float:
        """q_alpha(z); vectorized over an array of levels.

        Levels at or below 0 use the exact exponential form; positive
        levels are integrated over t (the kernel jumps at 0: draining
        through a level contributes a boundary-layer mass 1/M that levels
        above the start never receive).
        """
        z_arr = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z_arr)):
            raise DomainError("kernel argument must be finite")
        scalar = z_arr.ndim == 0
        z_arr = np.atleast_1d(z_arr)
        out = np.empty_like(z_arr)
        neg = z_arr <= 0.0
        out[neg] = self._plateau * np.exp(self._eta * z_arr[neg])
        out[~neg] = [self._density_scalar(float(v)) for v in z_arr[~neg]]
        return float(out[0]) if scalar else out

    def _density_scalar(self, z: float) -> float:
        mu, s2, s = self.params.mu, self.params.sigma2, self.params.sigma
        t0 = max(0.0, -z / self.M)
        R = math.sqrt(self._t_span(t0))
        edges = R * np.linspace(0.0, 1.0, self._PANELS + 1) ** 1.4
        gx, gw = gauss_legendre(self._NODES)
        mids = 0.5 * (edges[1:] + edges[:-1])
        halves = 0.5 * (edges[1:] - edges[:-1])
        r = mids[:, None] + halves[:, None] * gx[None, :]
        t = t0 + r * r
        w = z + self.M * t
        ws = np.maximum(w, 1e-300)
        dens = np.where(
            w > 0.0,
            t / (s * np.sqrt(2.0 * math.pi * ws**3))
            * np.exp(-((mu * ws - t) ** 2) / (2.0 * ws * s2)),
            0.0,
        )
        vals = 2.0 * r * np.exp(-self.alpha * t) * dens
        return float(np.sum(halves * (vals @ gw)))

    # tabulation ---------------------------------------------------------
    def build_table(self, lo: float, hi: float, step: float = 0.01) -> None:
        """Tabulate q_alpha on (0, hi] for interpolated evaluation.

        The positive side carries a square-root cusp at 0 and is splined
        in s = sqrt(z), where it is smooth; ``step`` is the s-grid
        spacing.  The nonpositive side is exact and needs no table.
        Extends (never shrinks) an existing table; ``lo`` is accepted for
        interface symmetry and ignored below 0.
        """
        hi = max(hi, 1e-6)
        if self._spline is not None:
            hi = max(hi, self._spline_range[1])
            if hi == self._spline_range[1]:
                return
        s_pos = np.arange(0.0, math.sqrt(hi) + step, step)
        q_pos = np.array([self._density_scalar(s * s) for s in s_pos])
        self._spline_pos = CubicSpline(s_pos, q_pos)
        # antiderivative from 0: integral of q(s^2) 2 s ds
        self._cum_pos = CubicSpline(s_pos, q_pos * 2.0 * s_pos).antiderivative()
        self._spline = self._spline_pos  # sentinel: table built
        self._spline_range = (-math.inf, float(s_pos[-1] ** 2))

    def _require_table(self) -> None:
        if self._spline is None:
            raise RuntimeError("build_table must be called before interpolated evaluation")

    def density_interp(self, z):
        """Tabulated (positive side) / exact (nonpositive side) kernel;
        zero beyond the tabulated upper edge."""
        self._require_table()
        z = np.asarray(z, dtype=float)
        hi = self._spline_range[1]
        s = np.sqrt(np.clip(z, 0.0, hi))
        out = np.where(
            z <= 0.0,
            self._plateau * np.exp(self._eta * np.minimum(z, 0.0)),
            self._spline_pos(s),
        )
        return np.where(z > hi, 0.0, out)

    def cum_interp(self, z):
        """Signed antiderivative from 0: integral_0^z q_alpha(v) dv
        (negative for z < 0), saturating at the tabulated upper edge."""
        self._require_table()
        z = np.asarray(z, dtype=float)
        hi = self._spline_range[1]
        s = np.sqrt(np.clip(z, 0.0, hi))
        if self._eta > 0.0:
            neg = self._plateau * (np.exp(self._eta * np.minimum(z, 0.0)) - 1.0) / self._eta
        else:
            neg = self._plateau * np.minimum(z, 0.0)
        return np.where(z <= 0.0, neg, self._cum_pos(s))

    def density_sqrt_pos(self, s):
        """Tabulated q_alpha(s^2), smooth in s >= 0."""
        self._require_table()
        return self._spline_pos(np.minimum(s, math.sqrt(self._spline_range[1])))

    def density_sqrt_neg(self, s):
        """Exact q_alpha(-s^2) for s >= 0."""
        return self._plateau * np.exp(-self._eta * np.asarray(s) ** 2)


@dataclass
class KilledResolvent:
    """Discounted occupation of the release phase killed at the lower
    threshold.

    The kernel density vanishes identically when started exactly at the
    threshold, and with ``g = 1`` its total mass reproduces
    ``(1 - e^{-(x - tau) eta}) / alpha`` -- the occupation identity the
    tests lean on.
    """

    params: IGParams
    policy: Policy
    alpha: float
    quad: QuadConfig = field(default=DEFAULT_QUAD)
    kernel: ReleaseKernel | None = None

    def __post_init__(self) -> None:
        if self.alpha < 0.0 or not math.isfinite(self.alpha):
            raise DomainError("discount rate must be finite and >= 0")
        if self.alpha == 0.0 and self.params.mu * self.policy.M <= 1.0:
            raise DivergenceError(
                "undiscounted release occupation diverges when mu M <= 1"
            )
        if self.kernel is None:
            self.kernel = ReleaseKernel(self.params, self.policy.M, self.alpha, self.quad)
        self._eta = float(eta(self.params, self.policy.M, self.alpha))

    @property
    def eta_value(self) -> float:
        return self._eta

    def density(self, x: float, y) -> float:
        """Kernel density of U*_alpha(dy - x) at level y > tau, start x >= tau."""
        tau = self.policy.tau
        if x < tau:
            raise DomainError(f"release start must satisfy x >= tau, got {x!r}")
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr <= tau):
            raise DomainError("killed resolvent density requires y > tau")
        damp = math.exp(-(x - tau) * self._eta)
        scalar = y_arr.ndim == 0
        y_arr = np.atleast_1d(y_arr)
        out = self.kernel.density(y_arr - x) - damp * self.kernel.density(y_arr - tau)
        return float(out[0]) if scalar else out

    def _level_cutoff(self, x: float) -> float:
        # 0.7 safety margin on the rate absorbs the sub-exponential
        # corrections at the borderline alpha = mu (2 - mu M) / (2 sigma^2)
        rate = 0.7 * self.kernel.level_decay_rate()
        scale = 2.0 / max(self.params.mu, 1e-2)
        return exponential_cutoff(max(x, self.policy.tau), rate, scale, self.quad)

    def occupation(
        self,
        g_star: Callable[[np.ndarray], np.ndarray],
        x: float,
        points: Sequence[float] | None = None,
    ) -> float:
        """integral_tau^inf g*(y) U*_alpha(dy - x), exact (nested quadrature)."""
        tau = self.policy.tau
        if x < tau:
            raise DomainError(f"release start must satisfy x >= tau, got {x!r}")
        if x == tau:
            return 0.0
        damp = math.exp(-(x - tau) * self._eta)
        hi = self._level_cutoff(x)
        # always split at y = x (kernel kink) plus caller knots
        pts = sorted({x} | {p for p in (points or ()) if tau < p < hi})

        def integrand(y: float) -> float:
            k = self.kernel.density(y - x) - damp * self.kernel.density(y - tau)
            return float(g_star(np.asarray(y))) * k

        return integrate_adaptive(integrand, tau, hi, self.quad, points=pts)

    def occupation_mass(self, x: float) -> float:
        """Occupation of g* = 1: (1 - e^{-(x - tau) eta})/alpha for alpha > 0,
        (x - tau) mu / (mu M - 1) at alpha = 0 -- via quadrature (the closed
        forms are the tests' oracles, not this code path)."""
        return self.occupation(lambda y: np.ones_like(np.asarray(y, dtype=float)), x)
