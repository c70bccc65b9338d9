"""Shared fixtures: the benchmark parameter set and session-scoped Monte
Carlo sample banks reused across test modules (they are the expensive
part of the suite)."""

from __future__ import annotations

import numpy as np
import pytest

from igdam import (
    CostParams,
    IGParams,
    PenaltyFn,
    Policy,
    SimConfig,
    sample_fill_passages,
    sample_release_passages,
    simulate_cycles,
)

N_PASSAGES = 100_000


@pytest.fixture(scope="session")
def bench_params() -> IGParams:
    return IGParams(mu=2.0, sigma2=1.0)


@pytest.fixture(scope="session")
def bench_policy() -> Policy:
    return Policy(lam=3.0, tau=1.0, M=1.0)


@pytest.fixture(scope="session")
def bench_cost() -> CostParams:
    return CostParams(
        k1=1.0, k2=1.0, r=0.5, alpha=0.2,
        g=PenaltyFn.constant(1.0), g_star=PenaltyFn.constant(1.0),
    )


@pytest.fixture(scope="session")
def unit_params() -> IGParams:
    return IGParams(mu=1.0, sigma2=1.0)


@pytest.fixture(scope="session")
def fill_samples_gap2(unit_params):
    """(passage time, landing) for mu=1, sigma2=1 crossing level 2 from 0."""
    cfg = SimConfig(dt=0.02, seed=1010)
    return sample_fill_passages(unit_params, 0.0, 2.0, cfg, N_PASSAGES, seed=1010)


@pytest.fixture(scope="session")
def fill_samples_gap1(unit_params):
    """(passage time, landing) for mu=1, sigma2=1 crossing level 1 from 0."""
    cfg = SimConfig(dt=0.02, seed=2020)
    return sample_fill_passages(unit_params, 0.0, 1.0, cfg, N_PASSAGES, seed=2020)


@pytest.fixture(scope="session")
def release_samples(bench_params):
    """Release passage times for mu=2, sigma2=1, M=1 from 2 down to 1."""
    cfg = SimConfig(dt=0.02, seed=3030)
    return sample_release_passages(bench_params, 1.0, 2.0, 1.0, cfg, N_PASSAGES, seed=3030)


@pytest.fixture(scope="session")
def bench_run(bench_params, bench_policy, bench_cost):
    """12k benchmark cycles (~1e5 simulated time units)."""
    cfg = SimConfig(dt=0.05, n_cycles=12_000, seed=4040)
    return simulate_cycles(bench_params, bench_policy, bench_cost, cfg)


def mc_dev(mc_mean: float, se: float, target: float) -> float:
    """Deviation of a Monte Carlo mean from its target in standard errors."""
    return abs(mc_mean - target) / se


def sample_stats(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))
