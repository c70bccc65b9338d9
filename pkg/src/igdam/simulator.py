"""Monte Carlo oracle for the controlled content process.

Simulates the bivariate (content, release-rate) process directly from
exact increment draws of the input law on an adaptive grid: filling
advances the content by sampled increments; releasing drains linearly at
rate M between jumps (jumps applied at step end), so the down-crossing of
the lower threshold is located exactly by interpolating the drain.  Near
either threshold the step shrinks by ``refine_factor`` (up to
``refine_stages`` times) once the level is within three expected step
movements, bounding the crossing-observation bias.

Every cycle owns a counter-based random stream derived from
(seed, cycle index), so runs are reproducible and cycles can be simulated
concurrently and merged by index.  Nothing here consults the closed-form
laws: the simulator is the independent check of the analytic side.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError
from .ig_core import IGParams, rng_stream, sample_increment
from .passage_laws import Policy
from .cost_model import CostParams
from .quadrature import DEFAULT_QUAD, exponential_cutoff

__all__ = [
    "SimConfig",
    "CycleRecord",
    "SimResult",
    "occupancy_grid",
    "simulate_cycles",
    "estimate_discounted",
    "estimate_stationary",
    "sample_fill_passages",
    "sample_release_passages",
]


@dataclass(frozen=True)
class SimConfig:
    """Simulation discretization and bookkeeping policy.

    ``dt`` is the base step; within three expected step movements of a
    threshold it shrinks by ``refine_factor``, at most ``refine_stages``
    times.  ``horizon`` caps a single cycle's simulated time (subcritical
    release phases may never end); ``burn_in`` is simulated time dropped
    from occupancy statistics.
    """

    dt: float = 0.05
    refine_factor: float = 10.0
    refine_stages: int = 2
    n_cycles: int = 1000
    horizon: float = 1e6
    seed: int = 0
    burn_in: float = 0.0
    chunk: int = 256
    occupancy_bins: int = 240

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise DomainError("SimConfig.dt must be finite and > 0")
        if self.refine_factor < 1.0:
            raise DomainError("SimConfig.refine_factor must be >= 1")
        if self.refine_stages < 0:
            raise DomainError("SimConfig.refine_stages must be >= 0")
        if self.n_cycles < 1:
            raise DomainError("SimConfig.n_cycles must be >= 1")
        if self.horizon <= 0.0:
            raise DomainError("SimConfig.horizon must be > 0")
        if self.burn_in < 0.0:
            raise DomainError("SimConfig.burn_in must be >= 0")
        if self.chunk < 8:
            raise DomainError("SimConfig.chunk must be >= 8")
        if self.occupancy_bins < 2:
            raise DomainError("SimConfig.occupancy_bins must be >= 2")


@dataclass(frozen=True)
class CycleRecord:
    """One regeneration cycle: passage times, landing, and accrued costs.

    ``occupancy[i]`` is the time this cycle's content spent at or below
    ``grid[i]``; ``cost_discounted`` discounts within the cycle from its
    own start (the cycle-start switch-off charge K2 M sits at local time
    zero, the switch-on charge at the up-crossing).
    """

    index: int
    start_level: float
    w_lambda: float
    landing: float
    w_tau_star: float
    duration: float
    cost_discounted: float
    cost_flat: float
    horizon_exceeded: bool
    occupancy: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SimResult:
    params: IGParams
    policy: Policy
    cost: CostParams
    config: SimConfig
    start_level: float
    grid: np.ndarray
    records: list[CycleRecord]

    @property
    def completed(self) -> list[CycleRecord]:
        return [r for r in self.records if not r.horizon_exceeded]

    @property
    def n_exceeded(self) -> int:
        return sum(r.horizon_exceeded for r in self.records)

    def estimates(self) -> dict[str, tuple[float, float]]:
        """Point estimates with standard errors over completed cycles."""
        recs = self.completed
        if not recs:
            raise InsufficientDataError("no completed cycles")
        n = len(recs)
        fill = np.array([r.w_lambda for r in recs])
        rel = np.array([r.w_tau_star for r in recs])
        dur = np.array([r.duration for r in recs])
        land = np.array([r.landing for r in recs])
        flat = np.array([r.cost_flat for r in recs])
        lt = np.exp(-self.cost.alpha * dur) if self.cost.alpha > 0 else np.ones(n)

        def mse(v: np.ndarray) -> tuple[float, float]:
            return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0

        out = {
            "fill_mean": mse(fill),
            "release_mean": mse(rel),
            "cycle_mean": mse(dur),
            "landing_mean": mse(land),
            "cycle_transform": mse(lt),
        }
        # regenerative ratio estimator for the long-run average cost
        rbar = float(flat.sum() / dur.sum())
        resid = flat - rbar * dur
        se = float(np.std(resid, ddof=1) / (dur.mean() * math.sqrt(n))) if n > 1 else 0.0
        out["average_cost"] = (rbar, se)
        return out


def occupancy_grid(params: IGParams, policy: Policy, n: int = 240) -> np.ndarray:
    """Deterministic level grid for occupancy statistics: from the lower
    threshold to where the landing law's jump tail is negligible."""
    rate = 0.85 * params.mu**2 / (2.0 * params.sigma2)
    scale = max(1.0, policy.gap * params.mu) / (params.sigma * math.sqrt(2.0 * math.pi))
    z_hi = exponential_cutoff(policy.lam, rate, scale, DEFAULT_QUAD)
    return np.linspace(policy.tau, z_hi, n)


def _window_fill(params: IGParams, dt: float) -> float:
    mean = dt / params.mu
    sd = math.sqrt(dt * params.sigma2 / params.mu**3)
    return 3.0 * (mean + 3.0 * sd)


def _window_release(params: IGParams, M: float, dt: float) -> float:
    return 3.0 * M * dt + _window_fill(params, dt)


def _fill_phase(params, policy, cfg, rng, alpha, g, grid, z0):
    """Advance the fill phase to the up-crossing of lam.

    Returns (w_lambda, landing, pen_disc, pen_flat, occupancy, exceeded).
    """
    lam = policy.lam
    t, z = 0.0, float(z0)
    dt, stage = cfg.dt, 0
    pen_disc = pen_flat = 0.0
    occ = np.zeros(len(grid))
    while True:
        if t > cfg.horizon:
            return t, z, pen_disc, pen_flat, occ, True
        if stage < cfg.refine_stages and lam - z <= _window_fill(params, dt):
            dt /= cfg.refine_factor
            stage += 1
            continue
        inc = sample_increment(params, dt, rng, cfg.chunk)
        csum = np.cumsum(inc)
        zpost = z + csum
        zpre = np.empty_like(zpost)
        zpre[0] = z
        zpre[1:] = zpost[:-1]
        cross = zpost >= lam
        stop = cross
        if stage < cfg.refine_stages:
            stop = cross | ((lam - zpost) <= _window_fill(params, dt))
        k = int(np.argmax(stop)) if stop.any() else cfg.chunk - 1
        m = k + 1
        times = t + dt * np.arange(1, m + 1)
        g_mid = 0.5 * (np.asarray(g(zpre[:m]), dtype=float) + np.asarray(g(zpost[:m]), dtype=float))
        pen_disc += float(np.sum(np.exp(-alpha * (times - 0.5 * dt)) * g_mid) * dt)
        pen_flat += float(np.sum(g_mid) * dt)
        # content sits at its pre-step level until the jump at step end
        occ += dt * np.sum(zpre[:m, None] <= grid[None, :], axis=0)
        t = float(times[-1])
        z = float(zpost[k])
        if cross[k]:
            return t, z, pen_disc, pen_flat, occ, False


def _release_phase(params, policy, cfg, rng, alpha, g_star, reward_rate, grid, z0, t0):
    """Drain from the landing level to tau (jumps lumped at step end, the
    tau-crossing located exactly on the linear drain).

    Returns (w_tau_star, pen_disc, pen_flat, occupancy, exceeded); the
    penalty integrand is g*(level) - reward_rate, discounted from the
    cycle start (t0 = time already elapsed in this cycle).
    """
    tau, M = policy.tau, policy.M
    t, z = float(t0), float(z0)
    dt, stage = cfg.dt, 0
    pen_disc = pen_flat = 0.0
    occ = np.zeros(len(grid))
    while True:
        if t - t0 > cfg.horizon:
            return t - t0, pen_disc, pen_flat, occ, True
        while stage < cfg.refine_stages and z - tau <= _window_release(params, M, dt):
            dt /= cfg.refine_factor
            stage += 1
        inc = sample_increment(params, dt, rng, cfg.chunk)
        pre = np.empty(cfg.chunk)
        pre[0] = z
        pre[1:] = z + np.cumsum(inc[:-1]) - M * dt * np.arange(1, cfg.chunk)
        hit = pre - M * dt <= tau
        if stage < cfg.refine_stages:
            # stop *before* a step that starts inside the refinement window
            trig = (pre - tau) <= _window_release(params, M, dt)
            trig[0] = False  # the loop head already cleared the entry state
            stop = hit | trig
        else:
            trig = np.zeros(cfg.chunk, dtype=bool)
            stop = hit
        k = int(np.argmax(stop)) if stop.any() else cfg.chunk - 1
        hit_now = bool(hit[k]) and not bool(trig[k])
        m = k if (hit_now or trig[k]) else k + 1  # full steps to process
        if m > 0:
            times = t + dt * np.arange(m)
            mid = pre[:m] - 0.5 * M * dt
            g_mid = np.asarray(g_star(mid), dtype=float) - reward_rate
            pen_disc += float(np.sum(np.exp(-alpha * (times + 0.5 * dt)) * g_mid) * dt)
            pen_flat += float(np.sum(g_mid) * dt)
            lo = pre[:m] - M * dt
            occ += dt * np.sum(np.clip((grid[None, :] - lo[:, None]) / (M * dt), 0.0, 1.0), axis=0)
        if hit_now:
            t_k = t + dt * k
            s_star = (pre[k] - tau) / M
            g_mid = float(g_star(np.asarray(pre[k] - 0.5 * M * s_star))) - reward_rate
            pen_disc += math.exp(-alpha * (t_k + 0.5 * s_star)) * g_mid * s_star
            pen_flat += g_mid * s_star
            if pre[k] > tau:
                occ += s_star * np.clip((grid - tau) / (pre[k] - tau), 0.0, 1.0)
            return t_k + s_star - t0, pen_disc, pen_flat, occ, False
        t = t + dt * m
        if m > 0:
            z = float(pre[m - 1] - M * dt + inc[m - 1])


def _simulate_cycle(params, policy, cost, cfg, grid, index, start_level):
    rng = rng_stream(cfg.seed, index)
    alpha = cost.alpha
    if start_level < policy.lam:
        w_lam, landing, pd_f, pf_f, occ_f, exceeded = _fill_phase(
            params, policy, cfg, rng, alpha, cost.g, grid, start_level
        )
    else:
        w_lam, landing = 0.0, float(start_level)
        pd_f = pf_f = 0.0
        occ_f = np.zeros(len(grid))
        exceeded = False
    if exceeded:
        return CycleRecord(
            index, start_level, math.nan, math.nan, math.nan, w_lam,
            math.nan, math.nan, True, occ_f,
        )
    w_star, pd_r, pf_r, occ_r, exceeded = _release_phase(
        params, policy, cfg, rng, alpha, cost.g_star, cost.r * policy.M, grid, landing, w_lam
    )
    if exceeded:
        return CycleRecord(
            index, start_level, w_lam, landing, math.nan, w_lam + w_star,
            math.nan, math.nan, True, occ_f + occ_r,
        )
    m = policy.M
    cost_disc = m * (cost.k2 + cost.k1 * math.exp(-alpha * w_lam)) + pd_f + pd_r
    cost_flat = m * (cost.k1 + cost.k2) + pf_f + pf_r
    return CycleRecord(
        index, start_level, w_lam, landing, w_star, w_lam + w_star,
        cost_disc, cost_flat, False, occ_f + occ_r,
    )


def simulate_cycles(
    params: IGParams,
    policy: Policy,
    cost: CostParams,
    config: SimConfig,
    start_level: float | None = None,
    threads: int = 1,
) -> SimResult:
    """Simulate ``config.n_cycles`` regeneration cycles.

    The first cycle starts at ``start_level`` (default: the lower
    threshold); all later cycles start at the lower threshold.  Cycles
    draw from independent streams keyed by (seed, index) and results are
    merged by index, so the output is identical for any thread count.
    """
    x0 = policy.tau if start_level is None else float(start_level)
    grid = occupancy_grid(params, policy, config.occupancy_bins)

    def run(i: int) -> CycleRecord:
        z0 = x0 if i == 0 else policy.tau
        return _simulate_cycle(params, policy, cost, config, grid, i, z0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, range(config.n_cycles)))
    else:
        records = [run(i) for i in range(config.n_cycles)]
    return SimResult(params, policy, cost, config, x0, grid, records)


def estimate_discounted(
    result: SimResult, alpha: float | None = None, tail_eps: float = 1e-10
) -> tuple[float, float]:
    """Regenerative estimate of the total discounted cost with a
    per-block standard error.

    Consecutive cycles are grouped into blocks long enough that the
    discount factor across one block falls below ``tail_eps``; each block
    then yields an independent sample of the total discounted cost from
    the lower threshold.  Requires the simulation to have started there.
    """
    a = result.cost.alpha if alpha is None else float(alpha)
    if a <= 0.0:
        raise DomainError("discounted estimation requires alpha > 0")
    if result.start_level != result.policy.tau:
        raise DomainError("block estimator requires the simulation to start at tau")
    span = -math.log(tail_eps) / a
    blocks: list[float] = []
    acc, t_local = 0.0, 0.0
    for r in result.records:
        if r.horizon_exceeded:
            continue
        acc += math.exp(-a * t_local) * r.cost_discounted
        t_local += r.duration
        if t_local >= span:
            blocks.append(acc)
            acc, t_local = 0.0, 0.0
    if len(blocks) < 2:
        raise InsufficientDataError(
            f"need at least 2 full discount blocks (block span {span:.3g}); "
            f"got {len(blocks)} - simulate more cycles"
        )
    arr = np.asarray(blocks)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def estimate_stationary(result: SimResult) -> tuple[np.ndarray, np.ndarray]:
    """Time-weighted empirical distribution of the content level after
    the configured burn-in, on the simulation's occupancy grid."""
    burn = result.config.burn_in
    elapsed = 0.0
    occ = np.zeros(len(result.grid))
    total = 0.0
    for r in result.records:
        if r.horizon_exceeded:
            continue
        if elapsed < burn:
            elapsed += r.duration
            continue
        occ += r.occupancy
        total += r.duration
    if total <= 0.0:
        raise InsufficientDataError("no simulated time past burn-in")
    return result.grid, occ / total


# --- batch passage samplers (law-level oracles) --------------------------

def sample_fill_passages(
    params: IGParams,
    x: float,
    lam: float,
    config: SimConfig,
    n: int,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of fill-phase passages from ``x`` over ``lam``.

    Returns (passage times, landing levels) for ``n`` independent paths,
    stepped exactly like the cycle simulator (one shared stream; rows are
    advanced stage-by-stage and compacted as they finish).
    """
    if x >= lam:
        return np.zeros(n), np.full(n, float(x))
    rng = rng_stream(config.seed if seed is None else seed, 1)
    w_out = np.zeros(n)
    z_out = np.zeros(n)
    t = np.zeros(n)
    z = np.full(n, float(x))
    stage = np.zeros(n, dtype=int)
    alive = np.arange(n)
    chunk = 64
    max_sweeps = int(1e7)
    for _ in range(max_sweeps):
        if alive.size == 0:
            break
        for s in range(config.refine_stages + 1):
            rows = alive[stage[alive] == s]
            if rows.size == 0:
                continue
            dt = config.dt / config.refine_factor**s
            window = _window_fill(params, dt)
            refinable = s < config.refine_stages
            inc = sample_increment(params, dt, rng, (rows.size, chunk))
            zpost = z[rows, None] + np.cumsum(inc, axis=1)
            cross = zpost >= lam
            stop = cross | ((lam - zpost) <= window) if refinable else cross
            any_stop = stop.any(axis=1)
            k = np.where(any_stop, np.argmax(stop, axis=1), chunk - 1)
            sel = np.arange(rows.size)
            z[rows] = zpost[sel, k]
            t[rows] += dt * (k + 1)
            crossed = cross[sel, k]
            done = rows[crossed]
            w_out[done] = t[done]
            z_out[done] = z[done]
            stage[rows[~crossed & any_stop[sel]]] += 1 if refinable else 0
        alive = alive[z[alive] < lam]
    else:
        raise InsufficientDataError("fill passage sampling did not terminate")
    return w_out, z_out


def sample_release_passages(
    params: IGParams,
    M: float,
    x: float,
    tau: float,
    config: SimConfig,
    n: int,
    seed: int | None = None,
) -> np.ndarray:
    """Vectorized batch of release-phase passages from ``x`` down to
    ``tau`` at drain rate ``M`` (jumps at step end, crossing interpolated
    on the drain).  Paths exceeding the horizon return NaN."""
    if x <= tau:
        return np.zeros(n)
    rng = rng_stream(config.seed if seed is None else seed, 2)
    w_out = np.full(n, math.nan)
    t = np.zeros(n)
    z = np.full(n, float(x))
    stage = np.zeros(n, dtype=int)
    done = np.zeros(n, dtype=bool)
    chunk = 64
    max_sweeps = int(1e7)
    for _ in range(max_sweeps):
        alive = np.nonzero(~done & (t <= config.horizon))[0]
        if alive.size == 0:
            break
        for s in range(config.refine_stages + 1):
            rows = alive[stage[alive] == s]
            if rows.size == 0:
                continue
            dt = config.dt / config.refine_factor**s
            window = _window_release(params, M, dt)
            refinable = s < config.refine_stages
            inc = sample_increment(params, dt, rng, (rows.size, chunk))
            pre = np.empty((rows.size, chunk))
            pre[:, 0] = z[rows]
            pre[:, 1:] = z[rows, None] + np.cumsum(inc[:, :-1], axis=1) - M * dt * np.arange(1, chunk)
            hit = pre - M * dt <= tau
            if refinable:
                trig = (pre - tau) <= window
                stop = hit | trig
            else:
                trig = np.zeros_like(hit)
                stop = hit
            any_stop = stop.any(axis=1)
            k = np.where(any_stop, np.argmax(stop, axis=1), chunk - 1)
            sel = np.arange(rows.size)
            trig_now = trig[sel, k]
            hit_now = hit[sel, k] & ~trig_now
            # rows that hit: exact crossing on the drain inside step k
            hr = rows[hit_now]
            if hr.size:
                kk = k[hit_now]
                s_star = (pre[hit_now, kk] - tau) / M
                w_out[hr] = t[hr] + dt * kk + s_star
                done[hr] = True
            # rows that enter the refinement window: stop before step k
            tr = rows[trig_now]
            if tr.size:
                kk = k[trig_now]
                z[tr] = pre[trig_now, kk]
                t[tr] += dt * kk
                stage[tr] += 1
            # remaining rows: advance through step k
            cont = ~hit_now & ~trig_now
            cr = rows[cont]
            if cr.size:
                kk = k[cont]
                z[cr] = pre[cont, kk] - M * dt + inc[cont, kk]
                t[cr] += dt * (kk + 1)
    else:
        raise InsufficientDataError("release passage sampling did not terminate")
    return w_out
