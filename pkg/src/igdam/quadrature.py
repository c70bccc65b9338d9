"""Quadrature policy and helpers.

Every numerical integral in the package is governed by a single
:class:`QuadConfig`: adaptive Gauss-Kronrod (via ``scipy.integrate.quad``)
for scalar integrals, fixed-order Gauss-Legendre panels for vectorized
inner loops, and an explicit truncation rule for semi-infinite integrands
with a known exponential tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError

__all__ = [
    "QuadConfig",
    "DEFAULT_QUAD",
    "integrate_adaptive",
    "integrate_exponential_tail",
    "exponential_cutoff",
    "gauss_legendre",
    "fixed_gauss",
    "fixed_gauss_panels",
]


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances and limits for all numerical integration.

    Attributes
    ----------
    rel_tol : float
        Relative tolerance for adaptive quadrature.
    abs_tol : float
        Absolute floor below which contributions are ignored.
    tail_mass_tol : float
        A semi-infinite integral is truncated where its exponential tail
        bound contributes less than this fraction of the integral scale.
    max_subdivisions : int
        Cap on adaptive refinement intervals.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    tail_mass_tol: float = 1e-11
    max_subdivisions: int = 500

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "tail_mass_tol"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0) or not math.isfinite(v):
                raise DomainError(f"QuadConfig.{name} must lie in (0, 1), got {v!r}")
        if self.max_subdivisions < 1:
            raise DomainError("QuadConfig.max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadConfig()


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadConfig = DEFAULT_QUAD,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive quadrature of ``f`` over the finite interval ``[a, b]``.

    ``points`` marks interior kinks (knots of piecewise penalty functions,
    spline joins) so the adaptor splits there first.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate_adaptive requires finite limits")
    if a == b:
        return 0.0
    pts = None
    if points is not None:
        pts = sorted(p for p in points if min(a, b) < p < max(a, b))
        if not pts:
            pts = None
    val, _ = integrate.quad(
        f, a, b,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
        limit=cfg.max_subdivisions, points=pts,
    )
    return val


def exponential_cutoff(
    a: float, rate: float, scale: float = 1.0, cfg: QuadConfig = DEFAULT_QUAD
) -> float:
    """Point beyond which ``scale * exp(-rate (x - a))`` has tail mass below
    ``cfg.tail_mass_tol``.  ``rate`` must be positive."""
    if rate <= 0.0 or not math.isfinite(rate):
        raise DomainError(f"tail rate must be positive, got {rate!r}")
    mass_target = cfg.tail_mass_tol * max(abs(scale), cfg.abs_tol)
    # tail mass beyond x is scale * exp(-rate (x-a)) / rate
    x = a + max(0.0, math.log(max(abs(scale), 1e-300) / (rate * mass_target))) / rate
    return x


def integrate_exponential_tail(
    f: Callable[[float], float],
    a: float,
    rate: float,
    scale: float = 1.0,
    cfg: QuadConfig = DEFAULT_QUAD,
    points: Sequence[float] | None = None,
) -> float:
    """Integrate ``f`` over ``[a, inf)`` given the tail bound
    ``|f(x)| <= scale * exp(-rate (x - a))`` for large ``x``.

    The interval is truncated at the point where the bound's remaining mass
    drops below ``tail_mass_tol`` and then integrated adaptively.
    """
    b = exponential_cutoff(a, rate, scale, cfg)
    return integrate_adaptive(f, a, b, cfg, points=points)


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def fixed_gauss(
    f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int = 64
) -> float:
    """n-point Gauss-Legendre rule on [a, b] for a vectorized integrand."""
    if a == b:
        return 0.0
    x, w = gauss_legendre(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(w, f(mid + half * x)))


def fixed_gauss_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    n: int = 32,
) -> float:
    """Gauss-Legendre applied panel-by-panel between consecutive ``edges``.

    All panels are evaluated in one vectorized call to ``f``.
    """
    e = np.asarray(edges, dtype=float)
    if e.size < 2:
        return 0.0
    x, w = gauss_legendre(n)
    mids = 0.5 * (e[1:] + e[:-1])
    halves = 0.5 * (e[1:] - e[:-1])
    nodes = (mids[:, None] + halves[:, None] * x[None, :]).ravel()
    vals = np.asarray(f(nodes), dtype=float).reshape(len(mids), n)
    return float(np.sum(halves * (vals @ w)))


def panel_edges(a: float, b: float, max_width: float = 1.0) -> np.ndarray:
    """Split [a, b] into roughly equal panels no wider than ``max_width``."""
    if b <= a:
        return np.array([a, b])
    k = max(1, int(math.ceil((b - a) / max_width)))
    return np.linspace(a, b, k + 1)
