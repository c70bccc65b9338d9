"""Policy economics: cycle costs, long-run averages, stationary content law.

A control cycle charges the switch costs ``K2 M`` (at the cycle start) and
``K1 M`` (at the up-crossing), accrues the state-dependent penalty rates
``g`` (filling) and ``g*`` (releasing), and earns ``R M`` per unit time of
release.  The discounted cycle cost started at ``x <= lam`` assembles as

    M (K2 + K1 E_x e^{-a W}) + [fill-phase penalty via the free resolvent]
    + E_x[ e^{-a W} * (release occupation of g* - R M from the landing level) ],

with the landing expectation taken against the discounted landing kernel.
Total discounted cost sums the geometric cycle series through the cycle
transform; the long-run average divides per-cycle quantities by the mean
cycle length, and the same occupation measures, normalized by it, give the
stationary distribution of the content (which exists iff ``mu M > 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, DomainError
from .ig_core import IGParams
from .overshoot import OvershootLaw
from .passage_laws import Policy, eta, lt_w_lambda, mean_w_lambda
from .quadrature import DEFAULT_QUAD, QuadConfig, exponential_cutoff, gauss_legendre
from .resolvents import KilledResolvent, ReleaseKernel, ResolventDensity

__all__ = [
    "PenaltyFn",
    "CostParams",
    "CostBreakdown",
    "PolicyEvaluation",
    "CostModel",
    "discounted_cycle_cost",
    "cycle_transform",
    "discounted_total_cost",
    "mean_cycle_length",
    "average_cost",
    "stationary_cdf",
    "evaluate_policy",
]


@dataclass(frozen=True)
class PenaltyFn:
    """Bounded penalty rate: constant, or piecewise linear over sorted
    knots with constant continuation outside the knot range.

    The recorded ``bound`` is sup|g|; evaluation is total on the reals.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.ys) or not self.xs:
            raise DomainError("penalty function needs matching, nonempty knot arrays")
        if any(not math.isfinite(v) for v in (*self.xs, *self.ys)):
            raise DomainError("penalty knots must be finite")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise DomainError("penalty knot abscissae must be strictly increasing")

    @classmethod
    def constant(cls, c: float) -> "PenaltyFn":
        return cls((0.0,), (float(c),))

    @classmethod
    def piecewise_linear(cls, xs: Sequence[float], ys: Sequence[float]) -> "PenaltyFn":
        return cls(tuple(float(x) for x in xs), tuple(float(y) for y in ys))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    @property
    def bound(self) -> float:
        return max(abs(y) for y in self.ys)

    @property
    def is_constant(self) -> bool:
        return len(set(self.ys)) == 1

    def knots(self) -> tuple[float, ...]:
        return self.xs if len(self.xs) > 1 else ()


@dataclass(frozen=True)
class CostParams:
    """Economic data: switch cost coefficients, output reward, discount
    rate, and the two penalty rates (both required nonnegative)."""

    k1: float
    k2: float
    r: float
    alpha: float
    g: PenaltyFn
    g_star: PenaltyFn

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "r", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"CostParams.{name} must be finite and >= 0, got {v!r}")
        for name in ("g", "g_star"):
            fn = getattr(self, name)
            if any(y < 0.0 for y in fn.ys):
                raise DomainError(f"CostParams.{name} must be nonnegative")


@dataclass(frozen=True)
class CostBreakdown:
    switching: float
    reward: float
    penalty_fill: float
    penalty_release: float

    @property
    def total(self) -> float:
        return self.switching + self.reward + self.penalty_fill + self.penalty_release

    def combine(self, other: "CostBreakdown", factor: float) -> "CostBreakdown":
        return CostBreakdown(
            self.switching + factor * other.switching,
            self.reward + factor * other.reward,
            self.penalty_fill + factor * other.penalty_fill,
            self.penalty_release + factor * other.penalty_release,
        )

    def scale(self, factor: float) -> "CostBreakdown":
        return CostBreakdown(
            factor * self.switching,
            factor * self.reward,
            factor * self.penalty_fill,
            factor * self.penalty_release,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "switching": self.switching,
            "reward": self.reward,
            "penalty_fill": self.penalty_fill,
            "penalty_release": self.penalty_release,
        }


@dataclass(frozen=True)
class PolicyEvaluation:
    """Headline figures plus their additive component breakdowns."""

    discounted_total: float
    discounted_components: CostBreakdown
    average_rate: float
    average_components: CostBreakdown | None
    cycle_mean: float


class CostModel:
    """Shared evaluation context for one (input law, policy, cost) triple.

    Caches the release kernel tabulation and the landing-law splines so
    repeated evaluations (optimizer sweeps, stationary grids) stay cheap.
    An external :class:`ReleaseKernel` can be injected to share the
    tabulation across policies with the same release rate and discount.
    """

    _LANDING_PANELS = 24
    _LANDING_NODES = 32

    def __init__(
        self,
        params: IGParams,
        policy: Policy,
        cost: CostParams,
        quad: QuadConfig = DEFAULT_QUAD,
        release_kernel: ReleaseKernel | None = None,
        release_kernel_avg: ReleaseKernel | None = None,
    ) -> None:
        self.params = params
        self.policy = policy
        self.cost = cost
        self.quad = quad
        self._laws: dict[float, OvershootLaw] = {}
        self._kernels: dict[float, ReleaseKernel] = {}
        if release_kernel is not None:
            self._kernels[release_kernel.alpha] = release_kernel
        if release_kernel_avg is not None:
            self._kernels[release_kernel_avg.alpha] = release_kernel_avg

    # --- shared pieces --------------------------------------------------
    def _law(self, level: float) -> OvershootLaw:
        law = self._laws.get(level)
        if law is None:
            law = OvershootLaw(self.params, level, self.quad)
            self._laws[level] = law
        return law

    def _kernel(self, alpha: float) -> ReleaseKernel:
        k = self._kernels.get(alpha)
        if k is None:
            k = ReleaseKernel(self.params, self.policy.M, alpha, self.quad)
            self._kernels[alpha] = k
        return k

    def _eta(self, alpha: float) -> float:
        return float(eta(self.params, self.policy.M, alpha))

    def _landing_cutoff(self) -> float:
        # landings start below lam; their law's own cutoff bounds the range
        return self._law(self.policy.gap).z_hi + self.policy.tau

    def _y_cutoff(self, alpha: float) -> float:
        rate = 0.7 * self._kernel(alpha).level_decay_rate()
        scale = 2.0 / max(self.params.mu, 1e-2)
        return exponential_cutoff(self._landing_cutoff(), rate, scale, self.quad)

    def _ensure_kernel_table(self, alpha: float) -> ReleaseKernel:
        kernel = self._kernel(alpha)
        y_hi = self._y_cutoff(alpha)
        lo = self.policy.tau - y_hi
        kernel.build_table(lo, y_hi - self.policy.tau)
        return kernel

    @staticmethod
    def _occ_side(
        g: Callable[[np.ndarray], np.ndarray],
        q_of_s: Callable[[np.ndarray], np.ndarray],
        w_col: np.ndarray,
        s_max: np.ndarray,
        sign: float,
        n_panels: int,
        gx: np.ndarray,
        gw: np.ndarray,
    ) -> np.ndarray:
        """Row-wise integral of g(w + sign s^2) q(sign s^2) 2 s ds over
        s in [0, s_max] (the sqrt substitution around the kernel cusp)."""
        frac = np.linspace(0.0, 1.0, n_panels + 1)
        edges = s_max[:, None] * frac[None, :]
        mids = 0.5 * (edges[:, 1:] + edges[:, :-1])
        halves = 0.5 * (edges[:, 1:] - edges[:, :-1])
        s = mids[:, :, None] + halves[:, :, None] * gx[None, None, :]
        y = w_col[:, :, None] + sign * s * s
        vals = np.asarray(g(y), dtype=float) * q_of_s(s) * 2.0 * s
        return np.sum(halves * np.einsum("ijk,k->ij", vals, gw), axis=1)

    def _killed_occupation_vec(
        self,
        g: Callable[[np.ndarray], np.ndarray],
        w: np.ndarray,
        alpha: float,
    ) -> np.ndarray:
        """Release occupation of ``g`` started from each landing level in
        ``w`` (all >= tau), via the tabulated kernel.

        Integrates g(y) q_a(y - w) over y in (tau, y_hi], substituting
        y = w +- s^2 on either side of the kernel's square-root cusp at
        y = w, then subtracts the killing correction e^{-(w - tau) eta}
        times the same integral started at tau.
        """
        tau = self.policy.tau
        kernel = self._ensure_kernel_table(alpha)
        eta_a = self._eta(alpha)
        y_hi = self._y_cutoff(alpha)
        gx, gw = gauss_legendre(24)
        w_arr = np.asarray(w, dtype=float)
        w_col = w_arr[:, None]
        s_left = np.sqrt(np.maximum(w_arr - tau, 0.0))
        s_right = np.sqrt(np.maximum(y_hi - w_arr, 0.0))
        j_w = self._occ_side(g, kernel.density_sqrt_neg, w_col, s_left, -1.0, 6, gx, gw)
        j_w += self._occ_side(g, kernel.density_sqrt_pos, w_col, s_right, +1.0, 10, gx, gw)
        tau_col = np.array([[tau]])
        j_tau = float(
            self._occ_side(
                g, kernel.density_sqrt_pos, tau_col,
                np.array([math.sqrt(y_hi - tau)]), +1.0, 12, gx, gw,
            )[0]
        )
        return j_w - np.exp(-(w_arr - tau) * eta_a) * j_tau

    # --- operations -------------------------------------------------------
    def fill_penalty(self, x: float, alpha: float) -> float:
        """Discounted fill-phase penalty from start x: the free-resolvent
        occupation of g over (x, lam)."""
        res = ResolventDensity(self.params, alpha, self.quad)
        return res.integrate_penalty(self.cost.g, x, self.policy.lam, points=self.cost.g.knots())

    def release_phase_components(self, x: float) -> tuple[float, float]:
        """(penalty_release, reward) parts of the discounted cycle cost:
        the landing expectation of the release occupation of g* and of the
        constant reward rate R M."""
        alpha = self.cost.alpha
        pol = self.policy
        if x >= pol.lam:
            w = np.array([max(x, pol.tau + 1e-12)])
            pen = float(self._killed_occupation_vec(self.cost.g_star, w, alpha)[0])
            base = float(self._killed_occupation_vec(lambda y: np.ones_like(y), w, alpha)[0])
            return pen, -self.cost.r * pol.M * base
        law = self._law(pol.lam - x)

        def h_pen(j: np.ndarray) -> np.ndarray:
            return self._killed_occupation_vec(self.cost.g_star, x + j, alpha)

        def h_one(j: np.ndarray) -> np.ndarray:
            return self._killed_occupation_vec(lambda y: np.ones_like(y), x + j, alpha)

        pen = law.expect(h_pen, alpha)
        base = law.expect(h_one, alpha)
        return pen, -self.cost.r * pol.M * base

    def discounted_cycle(self, x: float) -> CostBreakdown:
        """Expected discounted cost over one cycle started at ``x``.

        The cycle-start switch-off charge K2 M lands at local time zero,
        the switch-on charge K1 M at the up-crossing.  Requires a positive
        discount; the undiscounted analogue is the average-cost path.
        """
        alpha = self.cost.alpha
        if alpha <= 0.0:
            raise DomainError("discounted cycle cost requires alpha > 0; use average_cost")
        pol = self.policy
        if x > pol.lam:
            lt = 1.0
            fill_pen = 0.0
        else:
            lt = lt_w_lambda(self.params, x, pol.lam, alpha)
            fill_pen = self.fill_penalty(x, alpha)
        switching = pol.M * (self.cost.k2 + self.cost.k1 * lt)
        pen_rel, reward = self.release_phase_components(x)
        return CostBreakdown(switching, reward, fill_pen, pen_rel)

    def cycle_transform(self, x: float, alpha: float | None = None) -> float:
        """E_x e^{-alpha T*}: transform of the time to complete the running
        cycle (reach lam, then drain to tau)."""
        a = self.cost.alpha if alpha is None else alpha
        if a <= 0.0:
            raise DomainError("cycle transform requires alpha > 0")
        pol = self.policy
        eta_a = self._eta(a)
        if x >= pol.lam:
            return math.exp(-eta_a * (x - pol.tau))
        res = ResolventDensity(self.params, a, self.quad)
        integral = res.tail_integral(pol.lam - x, weight=eta_a)
        return pol.M * eta_a * math.exp(-eta_a * (x - pol.tau)) * integral

    def discounted_total(self, x: float) -> CostBreakdown:
        """Total discounted cost from start ``x``: the first cycle plus the
        geometric resummation of tau-cycles."""
        first = self.discounted_cycle(x)
        ct_x = self.cycle_transform(x)
        ct_tau = self.cycle_transform(self.policy.tau)
        tau_cycle = first if x == self.policy.tau else self.discounted_cycle(self.policy.tau)
        factor = ct_x / (1.0 - ct_tau)
        return first.combine(tau_cycle, factor)

    def mean_cycle(self) -> float:
        """Expected cycle length from tau; infinite when mu M <= 1."""
        mm = self.params.mu * self.policy.M
        if mm <= 1.0:
            return math.inf
        return mm * mean_w_lambda(self.params, 0.0, self.policy.gap) / (mm - 1.0)

    def average(self) -> tuple[float, CostBreakdown | None]:
        """Long-run average cost rate and its breakdown; infinite (with no
        breakdown) when the cycle length has no mean."""
        mm = self.params.mu * self.policy.M
        if mm <= 1.0:
            return math.inf, None
        pol, cost = self.policy, self.cost
        ew = self.mean_cycle()
        law = self._law(pol.gap)
        switching = pol.M * (cost.k1 + cost.k2) / ew
        res0 = ResolventDensity(self.params, 0.0, self.quad)
        fill_pen = res0.integrate_penalty(cost.g, pol.tau, pol.lam, points=cost.g.knots()) / ew
        # reward: mean release duration from the landing level, Eq-weighted
        # by the landing law (j is the landing minus tau)
        drift = mm - 1.0
        reward = -cost.r * pol.M * law.expect(lambda j: j * self.params.mu / drift) / ew
        pen_rel = law.expect(lambda j: self._killed_occupation_vec(cost.g_star, pol.tau + j, 0.0)) / ew
        return (switching + reward + fill_pen + pen_rel), CostBreakdown(
            switching, reward, fill_pen, pen_rel
        )

    def stationary_cdf(self, z) -> np.ndarray | float:
        """Stationary distribution of the content level.

        Ratio of the expected cycle occupation below ``z`` (fill phase via
        the free resolvent up to min(z, lam); release phase via the killed
        kernel from the landing law) to the mean cycle length.
        """
        mm = self.params.mu * self.policy.M
        if mm <= 1.0:
            raise DivergenceError("no stationary law: mu M <= 1")
        z_arr = np.asarray(z, dtype=float)
        scalar = z_arr.ndim == 0
        z_arr = np.atleast_1d(z_arr).astype(float)
        pol = self.policy
        tau, lam = pol.tau, pol.lam
        law = self._law(pol.gap)
        kernel = self._ensure_kernel_table(0.0)
        ew0 = mean_w_lambda(self.params, 0.0, pol.gap)
        out = np.zeros_like(z_arr)
        # eta(0) = 0 here, so the killing correction is the kernel at tau itself
        for i, zz in enumerate(z_arr):
            if zz <= tau:
                out[i] = 0.0
                continue
            fill = mean_w_lambda(self.params, 0.0, min(zz, lam) - tau)

            def below(w: np.ndarray) -> np.ndarray:
                a = kernel.cum_interp(zz - w) - kernel.cum_interp(tau - w)
                b = kernel.cum_interp(zz - tau) - kernel.cum_interp(0.0)
                return np.clip(a - b, 0.0, None)

            release = law.expect(lambda j: below(tau + j))
            out[i] = (mm - 1.0) * (fill + release) / (mm * ew0)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def evaluate(self, x: float | None = None) -> PolicyEvaluation:
        start = self.policy.tau if x is None else x
        disc = self.discounted_total(start)
        avg, avg_comp = self.average()
        return PolicyEvaluation(
            discounted_total=disc.total,
            discounted_components=disc,
            average_rate=avg,
            average_components=avg_comp,
            cycle_mean=self.mean_cycle(),
        )


# --- module-level operation wrappers ------------------------------------

def discounted_cycle_cost(
    params: IGParams, policy: Policy, cost: CostParams, x: float,
    quad: QuadConfig = DEFAULT_QUAD,
) -> float:
    return CostModel(params, policy, cost, quad).discounted_cycle(x).total


def cycle_transform(
    params: IGParams, policy: Policy, alpha: float, x: float,
    quad: QuadConfig = DEFAULT_QUAD,
) -> float:
    dummy = CostParams(0.0, 0.0, 0.0, alpha, PenaltyFn.constant(0.0), PenaltyFn.constant(0.0))
    return CostModel(params, policy, dummy, quad).cycle_transform(x, alpha)


def discounted_total_cost(
    params: IGParams, policy: Policy, cost: CostParams, x: float,
    quad: QuadConfig = DEFAULT_QUAD,
) -> float:
    return CostModel(params, policy, cost, quad).discounted_total(x).total


def mean_cycle_length(params: IGParams, policy: Policy) -> float:
    mm = params.mu * policy.M
    if mm <= 1.0:
        return math.inf
    return mm * mean_w_lambda(params, 0.0, policy.gap) / (mm - 1.0)


def average_cost(
    params: IGParams, policy: Policy, cost: CostParams,
    quad: QuadConfig = DEFAULT_QUAD,
) -> float:
    return CostModel(params, policy, cost, quad).average()[0]


def stationary_cdf(
    params: IGParams, policy: Policy, z,
    quad: QuadConfig = DEFAULT_QUAD,
):
    dummy = CostParams(0.0, 0.0, 0.0, 0.0, PenaltyFn.constant(0.0), PenaltyFn.constant(0.0))
    return CostModel(params, policy, dummy, quad).stationary_cdf(z)


def evaluate_policy(
    params: IGParams, policy: Policy, cost: CostParams, x: float | None = None,
    quad: QuadConfig = DEFAULT_QUAD,
) -> PolicyEvaluation:
    return CostModel(params, policy, cost, quad).evaluate(x)
