"""Law of the threshold-crossing pair (passage time, landing level).

When the filling content jumps over the upper threshold, it lands strictly
above it; the landing level ``J`` and the passage time ``W`` are coupled.
With the start normalized to 0 and the threshold gap ``ell``, the joint
transform factorizes as

    E[e^{-a W - b J}] = (a + psi(b)) * integral_ell^inf e^{-b z} u_a(z) dz,

and expanding psi(b) against the transform of u_0 and inverting yields the
alpha-discounted landing kernel on (ell, inf):

    m_a(z) = a u_a(z) + (2/sigma^2) [ u_a(ell) u_0(z - ell)
             + integral_ell^z u_0(z - y) u_a'(y) dy - mu u_a(z) ],

whose a = 0 case is the landing (overshoot) density proper.  The 1/sigma^2
factor on the bracket is required for the transform expansion to balance
at sigma^2 != 1; normalization, the mean identity
``E J = E W / mu`` and simulation all confirm it (see the tests, which
also cross-check against the independent entrance-law form
``integral_0^ell u_0(u) nu(z - u) du``).

The landing density diverges like (z - ell)^(-1/2) at the threshold
(infinitely many small jumps), so every integral against it substitutes
z = ell + s^2.  A spline tabulation in the s variable, refined until the
total mass matches its closed-form target, backs the repeated integrals in
the cost model.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError
from .ig_core import IGParams, ig_density, laplace_exponent
from .passage_laws import lt_w_lambda, mean_w_lambda
from .quadrature import (
    DEFAULT_QUAD,
    QuadConfig,
    exponential_cutoff,
    gauss_legendre,
    integrate_adaptive,
)
from .resolvents import ResolventDensity

__all__ = ["OvershootLaw"]


class OvershootLaw:
    """Crossing law of the fill phase over a level gap ``ell`` from start 0.

    Landing levels live on (ell, inf); the public ``pdf`` / ``joint_*``
    evaluate the closed expansion directly, while ``expect`` integrates
    against a cached spline whose grid is refined until the total mass
    reproduces its closed-form target.
    """

    _CONV_PANELS = 12
    _CONV_NODES = 24
    # the substituted convolution integrand concentrates near the far end
    # (w ~ sqrt(z - ell), where the inner density derivative peaks) in a
    # feature whose width shrinks like 1/sqrt(z - ell); cubic clustering
    # of the panel edges toward that end resolves it at any level
    _CONV_EDGES = 1.0 - (1.0 - np.linspace(0.0, 1.0, _CONV_PANELS + 1)) ** 3

    def __init__(self, params: IGParams, level: float, quad: QuadConfig = DEFAULT_QUAD):
        if not math.isfinite(level) or level <= 0.0:
            raise DomainError(f"threshold gap must be finite and > 0, got {level!r}")
        self.params = params
        self.level = float(level)
        self.quad = quad
        self._u0 = ResolventDensity(params, 0.0, quad)
        self._res: dict[float, ResolventDensity] = {0.0: self._u0}
        self._tables: dict[float, tuple[CubicSpline, CubicSpline, float]] = {}
        mu, s2 = params.mu, params.sigma2
        # landing tail is bounded by (fill occupation mass) * (jump density),
        # which decays at the jump-measure rate mu^2 / (2 sigma^2)
        scale = max(mean_w_lambda(params, 0.0, level), 1.0) / (params.sigma * math.sqrt(2 * math.pi))
        self.z_hi = exponential_cutoff(level, 0.85 * mu * mu / (2.0 * s2), scale, quad)

    # --- densities -----------------------------------------------------
    def _resolvent(self, alpha: float) -> ResolventDensity:
        if alpha not in self._res:
            self._res[alpha] = ResolventDensity(self.params, alpha, self.quad)
        return self._res[alpha]

    def _convolution(self, z: np.ndarray, alpha: float) -> np.ndarray:
        """integral_ell^z u_0(z - y) u_alpha'(y) dy with the y = z - w^2
        substitution; vectorized over z."""
        ell = self.level
        ua = self._resolvent(alpha)
        gx, gw = gauss_legendre(self._CONV_NODES)
        w_max = np.sqrt(np.maximum(z - ell, 0.0))
        edges = self._CONV_EDGES
        out = np.zeros_like(z)
        pos = w_max > 0.0
        if not np.any(pos):
            return out
        wm = w_max[pos]
        e = wm[:, None] * edges[None, :]
        mids = 0.5 * (e[:, 1:] + e[:, :-1])
        halves = 0.5 * (e[:, 1:] - e[:, :-1])
        w = mids[:, :, None] + halves[:, :, None] * gx[None, None, :]
        y = z[pos, None, None] - w * w
        vals = self._u0.density_sqrt_sub(w.ravel()).reshape(w.shape) * ua.density_prime(
            np.maximum(y, ell * 1e-12).ravel()
        ).reshape(w.shape)
        out[pos] = np.sum(halves * np.einsum("ijk,k->ij", vals, gw), axis=1)
        return out

    def discounted_landing_pdf(self, alpha: float, z):
        """m_alpha(z): density of the landing level weighted by e^{-alpha W}.

        Defective for alpha > 0 with total mass E e^{-alpha W}; alpha = 0
        recovers the landing density.  Zero on (-inf, ell].
        """
        if alpha < 0.0 or not math.isfinite(alpha):
            raise DomainError("discount rate must be finite and >= 0")
        z_arr = np.asarray(z, dtype=float)
        scalar = z_arr.ndim == 0
        z_arr = np.atleast_1d(z_arr).astype(float)
        out = np.zeros_like(z_arr)
        ell = self.level
        sup = z_arr > ell
        if np.any(sup):
            zz = z_arr[sup]
            mu, s2 = self.params.mu, self.params.sigma2
            ua = self._resolvent(alpha)
            core = (
                ua.density(ell) * self._u0.density(zz - ell)
                + self._convolution(zz, alpha)
                - mu * ua.density(zz)
            )
            val = (2.0 / s2) * core
            if alpha > 0.0:
                val = val + alpha * ua.density(zz)
            out[sup] = val
        return float(out[0]) if scalar else out

    def pdf(self, z):
        """Landing (overshoot) density on (ell, inf); 0 at or below ell."""
        return self.discounted_landing_pdf(0.0, z)

    def mean(self) -> float:
        """E[J] in closed form: the mean passage time over the gap divided
        by the drift parameter (checked against quadrature of the pdf)."""
        return mean_w_lambda(self.params, 0.0, self.level) / self.params.mu

    # --- tabulation and integrals ---------------------------------------
    def _mass_target(self, alpha: float) -> float:
        if alpha == 0.0:
            return 1.0
        return lt_w_lambda(self.params, 0.0, self.level, alpha)

    def _table(self, alpha: float) -> tuple[CubicSpline, CubicSpline, float]:
        tab = self._tables.get(alpha)
        if tab is not None:
            return tab
        ell = self.level
        s_hi = math.sqrt(self.z_hi - ell)
        target = self._mass_target(alpha)
        n = 256
        for _ in range(3):
            s = np.linspace(0.0, s_hi, n)
            q = np.zeros_like(s)
            q[1:] = self.discounted_landing_pdf(alpha, ell + s[1:] ** 2) * 2.0 * s[1:]
            # s = 0 limit: m_alpha(ell + s^2) ~ c / s, so q -> 2c
            c = (2.0 / self.params.sigma2) * self._resolvent(alpha).density(ell) * (
                self.params.sigma / math.sqrt(2.0 * math.pi)
            )
            q[0] = 2.0 * c
            spline = CubicSpline(s, q)
            cum = spline.antiderivative()
            mass = float(cum(s_hi))
            if abs(mass - target) <= 2e-5 * max(target, 1e-6):
                break
            n *= 2
        tab = (spline, cum, mass)
        self._tables[alpha] = tab
        return tab

    def total_mass(self, alpha: float = 0.0) -> float:
        """Quadrature mass of the landing kernel (1 or E e^{-alpha W})."""
        return self._table(alpha)[2]

    def cdf(self, z, alpha: float = 0.0):
        """integral_ell^z of the landing kernel, from the tabulated spline."""
        spline, cum, _ = self._table(alpha)
        z_arr = np.asarray(z, dtype=float)
        s = np.sqrt(np.clip(z_arr - self.level, 0.0, self.z_hi - self.level))
        out = np.clip(cum(s), 0.0, None)
        return float(out) if z_arr.ndim == 0 else out

    def expect(self, h: Callable[[np.ndarray], np.ndarray], alpha: float = 0.0) -> float:
        """integral_ell^inf h(z) m_alpha(z) dz against the tabulated kernel.

        ``h`` must be vectorized and bounded (or exponentially dominated by
        the kernel tail).
        """
        spline, _, _ = self._table(alpha)
        ell = self.level
        s_hi = math.sqrt(self.z_hi - ell)

        def integrand(s: np.ndarray) -> np.ndarray:
            return spline(s) * np.asarray(h(ell + s * s), dtype=float)

        gx, gw = gauss_legendre(32)
        edges = np.linspace(0.0, s_hi, 24 + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        halves = 0.5 * (edges[1:] - edges[:-1])
        nodes = (mids[:, None] + halves[:, None] * gx[None, :]).ravel()
        vals = integrand(nodes).reshape(len(mids), len(gx))
        return float(np.sum(halves * (vals @ gw)))

    def expect_exact(self, h: Callable[[np.ndarray], np.ndarray], alpha: float = 0.0) -> float:
        """Adaptive-quadrature version of :meth:`expect` (slower; used by
        tests to bound the spline error)."""
        ell = self.level
        s_hi = math.sqrt(self.z_hi - ell)

        def integrand(s: float) -> float:
            if s == 0.0:
                return 0.0
            z = ell + s * s
            h_val = float(np.asarray(h(np.asarray(z))).reshape(-1)[0])
            return float(self.discounted_landing_pdf(alpha, z)) * 2.0 * s * h_val

        return integrate_adaptive(integrand, 0.0, s_hi, self.quad)

    # --- joint law -------------------------------------------------------
    def joint_transform(self, alpha: float, beta: float) -> float:
        """E[e^{-alpha W - beta J}] = (alpha + psi(beta)) L_beta(u_alpha on (ell, inf))."""
        if alpha < 0.0 or beta < 0.0:
            raise DomainError("transform arguments must be >= 0")
        if alpha == 0.0 and beta == 0.0:
            return 1.0
        ua = self._resolvent(alpha)
        factor = alpha + float(laplace_exponent(self.params, beta))
        return factor * ua.tail_integral(self.level, weight=beta)

    def joint_density(self, t: float, z, boundary_kernel: str = "transition"):
        """Joint density f(t, z) of (W, J) on t > 0, z > ell.

        ``boundary_kernel`` selects the factor multiplying u_0(z - ell):
        the time-domain transition density p(t, ell) ("transition", the
        reading whose t-marginal integrates back to the landing density)
        or the resolvent density u_0(ell) ("resolvent", kept only as the
        rejected alternative for the comparison tests).
        """
        if t <= 0.0 or not math.isfinite(t):
            raise DomainError("time must be finite and > 0")
        if boundary_kernel not in ("transition", "resolvent"):
            raise DomainError(f"unknown boundary kernel {boundary_kernel!r}")
        z_arr = np.asarray(z, dtype=float)
        scalar = z_arr.ndim == 0
        z_arr = np.atleast_1d(z_arr).astype(float)
        out = np.zeros_like(z_arr)
        ell = self.level
        sup = z_arr > ell
        if np.any(sup):
            zz = z_arr[sup]
            mu, s2 = self.params.mu, self.params.sigma2
            p_z = ig_density(self.params, t, zz)
            dp_dt = p_z * (1.0 / t + (mu * zz - t) / (zz * s2))
            if boundary_kernel == "transition":
                bound = float(ig_density(self.params, t, ell))
            else:
                bound = float(self._u0.density(ell))
            conv = self._joint_convolution(zz, t)
            out[sup] = dp_dt + (2.0 / s2) * (
                bound * self._u0.density(zz - ell) + conv - mu * p_z
            )
        return float(out[0]) if scalar else out

    def _joint_convolution(self, z: np.ndarray, t: float) -> np.ndarray:
        """integral_ell^z u_0(z - y) dp(t, y)/dy dy, substituted as in
        :meth:`_convolution`."""
        ell = self.level
        mu, s2 = self.params.mu, self.params.sigma2
        gx, gw = gauss_legendre(self._CONV_NODES)
        w_max = np.sqrt(np.maximum(z - ell, 0.0))
        edges = self._CONV_EDGES
        out = np.zeros_like(z)
        pos = w_max > 0.0
        if not np.any(pos):
            return out
        wm = w_max[pos]
        e = wm[:, None] * edges[None, :]
        mids = 0.5 * (e[:, 1:] + e[:, :-1])
        halves = 0.5 * (e[:, 1:] - e[:, :-1])
        w = mids[:, :, None] + halves[:, :, None] * gx[None, None, :]
        y = np.maximum(z[pos, None, None] - w * w, ell * 1e-12)
        p_y = ig_density(self.params, t, y.ravel()).reshape(y.shape)
        dp_dy = p_y * (-1.5 / y - mu * mu / (2.0 * s2) + t * t / (2.0 * y * y * s2))
        vals = self._u0.density_sqrt_sub(w.ravel()).reshape(w.shape) * dp_dy
        out[pos] = np.sum(halves * np.einsum("ijk,k->ij", vals, gw), axis=1)
        return out
