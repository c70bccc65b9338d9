"""Threshold-pair search over the feasible policy region.

The cost surface is evaluated through quadratures with tolerance-limited
smoothness, so the search is derivative-free: a coarse grid over the
feasible (lam, tau) box followed by local grid refinement around the
incumbent, shrinking the box by a factor of two per round.  Ties break
deterministically toward the smaller lam, then the smaller tau.  The full
evaluation trace is returned for surface plotting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cost_model import CostModel, CostParams
from .errors import DomainError
from .ig_core import IGParams
from .passage_laws import Policy
from .quadrature import DEFAULT_QUAD, QuadConfig
from .resolvents import ReleaseKernel

__all__ = ["SearchSpec", "OptimizeResult", "optimize"]


@dataclass(frozen=True)
class SearchSpec:
    """Search box, resolution, and objective for the policy search.

    ``objective`` is "average" (long-run average rate, needs mu M > 1) or
    "discounted" (total discounted cost from ``start``; ``start = None``
    starts each candidate at its own lower threshold).  ``min_gap`` keeps
    lam - tau away from zero, where cycle quantities degenerate.
    """

    lambda_range: tuple[float, float]
    tau_range: tuple[float, float]
    M: float = 1.0
    grid: int = 8
    refine_rounds: int = 3
    objective: str = "average"
    start: float | None = None
    min_gap: float | None = None

    def __post_init__(self) -> None:
        lo, hi = self.lambda_range
        tlo, thi = self.tau_range
        if not (0.0 < lo < hi) or not (0.0 <= tlo < thi):
            raise DomainError("search ranges must be ordered and nonnegative")
        if thi >= hi:
            raise DomainError("tau_range must end below lambda_range")
        if self.grid < 4:
            raise DomainError("grid must be >= 4 per axis")
        if self.refine_rounds < 0:
            raise DomainError("refine_rounds must be >= 0")
        if self.objective not in ("average", "discounted"):
            raise DomainError(f"unknown objective {self.objective!r}")
        if self.M <= 0.0:
            raise DomainError("release rate must be > 0")
        if self.min_gap is not None and self.min_gap <= 0.0:
            raise DomainError("min_gap must be > 0")

    @property
    def gap_floor(self) -> float:
        return self.min_gap if self.min_gap is not None else self.lambda_range[1] / 100.0


@dataclass(frozen=True)
class OptimizeResult:
    status: str  # "ok" or "infeasible"
    best: Policy | None
    value: float
    trace: list[tuple[float, float, float]] = field(repr=False)
    evaluations: int = 0


class _Objective:
    """Objective evaluator sharing release-kernel tabulations across
    candidate policies (they depend only on the input law, M, and the
    discount)."""

    def __init__(self, params: IGParams, cost: CostParams, spec: SearchSpec, quad: QuadConfig):
        self.params = params
        self.cost = cost
        self.spec = spec
        self.quad = quad
        self._kernels: dict[float, ReleaseKernel] = {}
        self._cache: dict[tuple[float, float], float] = {}

    def _kernel(self, alpha: float) -> ReleaseKernel | None:
        if alpha == 0.0 and self.params.mu * self.spec.M <= 1.0:
            return None
        k = self._kernels.get(alpha)
        if k is None:
            k = ReleaseKernel(self.params, self.spec.M, alpha, self.quad)
            self._kernels[alpha] = k
        return k

    def __call__(self, lam: float, tau: float) -> float:
        key = (lam, tau)
        if key in self._cache:
            return self._cache[key]
        policy = Policy(lam=lam, tau=tau, M=self.spec.M)
        if self.spec.objective == "average":
            kernel = self._kernel(0.0)
            if kernel is None:
                value = math.inf
            else:
                model = CostModel(
                    self.params, policy, self.cost, self.quad, release_kernel_avg=kernel
                )
                value = model.average()[0]
        else:
            model = CostModel(
                self.params, policy, self.cost, self.quad,
                release_kernel=self._kernel(self.cost.alpha),
            )
            x = self.spec.start if self.spec.start is not None else tau
            value = model.discounted_total(min(x, lam)).total
        self._cache[key] = value
        return value


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def optimize(
    params: IGParams,
    cost: CostParams,
    spec: SearchSpec,
    quad: QuadConfig = DEFAULT_QUAD,
) -> OptimizeResult:
    """Grid search with local refinement over feasible (lam, tau) pairs.

    Returns the incumbent policy, its objective value, and the full
    evaluation trace.  Deterministic: no randomness, ties resolved toward
    (smaller lam, smaller tau).  If every feasible candidate is infinite
    (average objective with mu M <= 1), the result is flagged infeasible.
    """
    if spec.objective == "discounted" and cost.alpha <= 0.0:
        raise DomainError("discounted objective requires cost.alpha > 0")
    objective = _Objective(params, cost, spec, quad)
    gap = spec.gap_floor
    trace: list[tuple[float, float, float]] = []

    def sweep(lams: np.ndarray, taus: np.ndarray, best):
        for lam in lams:
            for tau in taus:
                if tau < 0.0 or tau >= lam - gap:
                    continue
                lam_r, tau_r = round(float(lam), 12), round(float(tau), 12)
                val = objective(lam_r, tau_r)
                trace.append((lam_r, tau_r, val))
                if best is None or _better(val, lam_r, tau_r, best):
                    best = (val, lam_r, tau_r)
        return best

    def _better(val, lam, tau, best) -> bool:
        bval, blam, btau = best
        if val != bval:
            return val < bval
        return (lam, tau) < (blam, btau)

    lam_lo, lam_hi = spec.lambda_range
    tau_lo, tau_hi = spec.tau_range
    best = sweep(_axis(lam_lo, lam_hi, spec.grid), _axis(tau_lo, tau_hi, spec.grid), None)
    if best is None:
        raise DomainError("feasible set is empty: no (lam, tau) satisfies the gap constraint")

    d_lam = (lam_hi - lam_lo) / (spec.grid - 1)
    d_tau = (tau_hi - tau_lo) / (spec.grid - 1)
    for _ in range(spec.refine_rounds):
        d_lam /= 2.0
        d_tau /= 2.0
        _, blam, btau = best
        lams = _axis(
            max(lam_lo, blam - d_lam * (spec.grid - 1) / 2.0),
            min(lam_hi, blam + d_lam * (spec.grid - 1) / 2.0),
            spec.grid,
        )
        taus = _axis(
            max(tau_lo, btau - d_tau * (spec.grid - 1) / 2.0),
            min(tau_hi, btau + d_tau * (spec.grid - 1) / 2.0),
            spec.grid,
        )
        best = sweep(lams, taus, best)

    bval, blam, btau = best
    if not math.isfinite(bval):
        return OptimizeResult("infeasible", None, math.inf, trace, len(trace))
    return OptimizeResult(
        "ok", Policy(lam=blam, tau=btau, M=spec.M), bval, trace, len(trace)
    )
