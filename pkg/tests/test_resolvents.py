"""Resolvent calculus: the free occupation density, its transform
identity (the keystone everything else leans on), penalty integrals, and
the release-phase killed kernel."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from igdam import (
    DivergenceError,
    DomainError,
    IGParams,
    KilledResolvent,
    PenaltyFn,
    Policy,
    ReleaseKernel,
    ResolventDensity,
    eta,
    lt_w_lambda,
    lt_w_tau_star,
    mean_var_w_tau_star,
    mean_w_lambda,
)

STD = IGParams(1.0, 1.0)
BENCH = IGParams(2.0, 1.0)
POLICY = Policy(lam=3.0, tau=1.0, M=1.0)


def quad_transform(res: ResolventDensity, beta: float) -> float:
    """Independent oracle: brute quadrature of e^{-beta y} u_alpha(y) with
    the endpoint handled by substitution."""
    head, _ = integrate.quad(
        lambda w: math.exp(-beta * w * w) * float(res.density(w * w)) * 2.0 * w,
        0.0, 1.0, limit=300, epsabs=1e-13, epsrel=1e-12)
    tail, _ = integrate.quad(
        lambda y: math.exp(-beta * y) * float(res.density(y)),
        1.0, 2500.0, limit=500, epsabs=1e-13, epsrel=1e-12)
    return head + tail


class TestFreeResolvent:
    def test_closed_value_at_zero_discount(self):
        u0 = ResolventDensity(STD, 0.0)
        expected = math.exp(-0.5) / math.sqrt(2.0 * math.pi) + 0.5 * math.erfc(-1.0 / math.sqrt(2.0))
        assert float(u0.density(1.0)) == pytest.approx(expected, rel=1e-14)

    def test_rejects_bad_domain(self):
        res = ResolventDensity(STD, 0.5)
        with pytest.raises(DomainError):
            res.density(0.0)
        with pytest.raises(DomainError):
            res.density_prime(-1.0)
        with pytest.raises(DomainError):
            ResolventDensity(STD, -0.5)

    def test_transform_identity_example(self):
        res = ResolventDensity(STD, 0.5)
        assert quad_transform(res, 1.0) == pytest.approx(
            1.0 / (0.5 + math.sqrt(3.0) - 1.0), abs=1e-6)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_transform_identity_undiscounted(self, beta):
        res = ResolventDensity(STD, 0.0)
        target = 1.0 / (math.sqrt(2.0 * beta + 1.0) - 1.0)
        assert quad_transform(res, beta) == pytest.approx(target, rel=1e-6)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0])
    def test_transform_identity_grid(self, alpha, beta):
        if alpha == beta == 0.0:
            return  # both sides diverge
        p = IGParams(1.3, 0.7)
        res = ResolventDensity(p, alpha)
        assert quad_transform(res, beta) == pytest.approx(res.laplace(beta), rel=1e-6)

    def test_positive_for_large_discount(self):
        # the erfc-term prefactor turns negative for alpha > mu / sigma^2;
        # the density must stay positive anyway
        res = ResolventDensity(STD, 4.0)
        y = np.linspace(0.05, 20.0, 100)
        assert np.all(res.density(y) > 0.0)


class TestDensityDerivative:
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 2.5])
    @pytest.mark.parametrize("y", [0.3, 1.0, 4.0])
    def test_matches_finite_differences(self, alpha, y):
        res = ResolventDensity(STD, alpha)
        h = 1e-5
        fd = (float(res.density(y + h)) - float(res.density(y - h))) / (2.0 * h)
        an = float(res.density_prime(y))
        assert abs(an - fd) < max(1e-6, 1e-4 * abs(an))

    def test_tail_slope_negative(self):
        res = ResolventDensity(STD, 0.0)
        assert float(res.density_prime(4.0)) < 0.0

    def test_origin_blowup_rate(self):
        # |u'| ~ y^{-3/2} near the origin
        res = ResolventDensity(STD, 0.0)
        r = float(res.density_prime(1e-6)) / float(res.density_prime(4e-6))
        assert r == pytest.approx(8.0, rel=0.02)


class TestPenaltyIntegral:
    def test_zero_function(self):
        res = ResolventDensity(STD, 0.5)
        assert res.integrate_penalty(PenaltyFn.constant(0.0), 0.0, 2.0) == 0.0

    def test_occupation_identity_discounted(self):
        res = ResolventDensity(STD, 0.5)
        occ = res.integrate_penalty(PenaltyFn.constant(1.0), 0.0, 2.0)
        assert occ == pytest.approx((1.0 - lt_w_lambda(STD, 0.0, 2.0, 0.5)) / 0.5, abs=1e-6)

    def test_occupation_identity_undiscounted(self):
        res = ResolventDensity(STD, 0.0)
        occ = res.integrate_penalty(PenaltyFn.constant(1.0), 0.0, 1.0)
        assert occ == pytest.approx(mean_w_lambda(STD, 0.0, 1.0), abs=1e-6)

    def test_piecewise_against_brute_force(self):
        g = PenaltyFn.piecewise_linear([0.5, 1.2, 1.8], [0.0, 2.0, 0.5])
        res = ResolventDensity(STD, 0.3)
        val = res.integrate_penalty(g, 0.2, 2.0, points=g.knots())
        oracle, _ = integrate.quad(
            lambda w: float(g(0.2 + w * w)) * float(res.density(w * w)) * 2.0 * w,
            0.0, math.sqrt(1.8), limit=400,
            points=[math.sqrt(0.3), math.sqrt(1.0), math.sqrt(1.6)])
        assert val == pytest.approx(oracle, rel=1e-8)


class TestReleaseKernel:
    def test_matches_fine_grid_trapezoid(self):
        # brute-force oracle: trapezoid rule on a fine t-grid, with the
        # window density written out independently of the library
        kernel = ReleaseKernel(BENCH, 1.0, 0.5)
        z = 0.3
        t = np.linspace(1e-9, 60.0, 400_000)
        mu, s2 = BENCH.mu, BENCH.sigma2
        w = z + t
        dens = t / (math.sqrt(s2) * np.sqrt(2 * math.pi * w**3)) * np.exp(
            -((mu * w - t) ** 2) / (2 * w * s2))
        oracle = float(np.trapezoid(np.exp(-0.5 * t) * dens, t))
        assert kernel.density(z) == pytest.approx(oracle, abs=1e-6)

    def test_negative_side_exponential(self):
        kernel = ReleaseKernel(BENCH, 1.0, 0.5)
        e = float(eta(BENCH, 1.0, 0.5))
        # strong-Markov factorization: q(v) = e^{eta v} q(0-) for v <= 0
        q2, q5 = kernel.density(-2.0), kernel.density(-5.0)
        assert q2 > q5  # decreasing in |z| far below the start
        assert q5 / q2 == pytest.approx(math.exp(-3.0 * e), rel=1e-12)
        # dominated by the deterministic-drain discount to the start of support
        assert q5 <= math.exp(-0.5 * 5.0 / 1.0) * kernel.density(-1e-9) * 1.0001

    def test_undiscounted_plateau(self):
        kernel = ReleaseKernel(BENCH, 1.0, 0.0)
        # occupation density deep below the start is 1 / (M - 1/mu)
        assert kernel.density(-3.0) == pytest.approx(2.0, rel=1e-12)

    def test_subcritical_undiscounted_rejected(self):
        with pytest.raises(DivergenceError):
            ReleaseKernel(IGParams(0.5, 1.0), 1.0, 0.0)

    def test_interpolation_matches_exact(self):
        kernel = ReleaseKernel(BENCH, 1.0, 0.2)
        kernel.build_table(-10.0, 10.0)
        zs = np.concatenate([np.linspace(-5, -0.01, 40), np.linspace(0.011, 9.5, 60)])
        exact = kernel.density(zs)
        interp = kernel.density_interp(zs)
        assert np.max(np.abs(exact - interp)) < 1e-7

    def test_cumulative_matches_quadrature(self):
        kernel = ReleaseKernel(BENCH, 1.0, 0.2)
        kernel.build_table(-10.0, 10.0)
        for a, b in [(-3.0, -1.0), (-1.0, 2.0), (0.5, 6.0)]:
            oracle, _ = integrate.quad(lambda v: float(kernel.density(v)), a, b,
                                       limit=300, points=[0.0] if a < 0 < b else None)
            got = float(kernel.cum_interp(b) - kernel.cum_interp(a))
            assert got == pytest.approx(oracle, abs=5e-7)


class TestKilledResolvent:
    def test_density_vanishes_at_threshold_start(self):
        kr = KilledResolvent(BENCH, POLICY, 0.5)
        assert np.allclose(kr.density(POLICY.tau, np.array([1.5, 2.5, 4.0])), 0.0)

    def test_density_nonnegative(self):
        kr = KilledResolvent(BENCH, Policy(lam=3.0, tau=0.0, M=1.0), 0.5)
        assert float(kr.density(1.0, 2.0)) >= -1e-9

    def test_rejects_domain_violations(self):
        kr = KilledResolvent(BENCH, POLICY, 0.5)
        with pytest.raises(DomainError):
            kr.density(0.5, 2.0)
        with pytest.raises(DomainError):
            kr.density(2.0, 0.5)
        with pytest.raises(DivergenceError):
            KilledResolvent(IGParams(0.5, 1.0), POLICY, 0.0)

    def test_occupation_zero_function(self):
        kr = KilledResolvent(BENCH, POLICY, 0.5)
        assert kr.occupation(lambda y: np.zeros_like(y), 2.0) == 0.0

    @pytest.mark.parametrize("alpha,x", [(0.5, 2.0), (0.2, 3.5), (1.0, 1.3)])
    def test_occupation_identity_discounted(self, alpha, x):
        kr = KilledResolvent(BENCH, POLICY, alpha)
        target = (1.0 - lt_w_tau_star(BENCH, 1.0, x, 1.0, alpha)) / alpha
        assert kr.occupation_mass(x) == pytest.approx(target, abs=1e-5)

    def test_occupation_identity_subcritical_discounted(self):
        p = IGParams(0.5, 1.0)
        kr = KilledResolvent(p, POLICY, 0.3)
        target = (1.0 - lt_w_tau_star(p, 1.0, 2.0, 1.0, 0.3)) / 0.3
        assert kr.occupation_mass(2.0) == pytest.approx(target, abs=1e-5)

    def test_occupation_identity_undiscounted(self):
        kr = KilledResolvent(BENCH, POLICY, 0.0)
        mean, _ = mean_var_w_tau_star(BENCH, 1.0, 2.0, 1.0)
        assert kr.occupation_mass(2.0) == pytest.approx(mean, abs=1e-5)

    def test_occupation_monotone_in_start(self):
        kr = KilledResolvent(BENCH, POLICY, 0.3)
        g = lambda y: np.ones_like(np.asarray(y, dtype=float))
        vals = [kr.occupation(g, x) for x in (1.2, 2.0, 3.0, 4.5)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_occupation_starts_at_zero(self):
        kr = KilledResolvent(BENCH, POLICY, 0.3)
        assert kr.occupation(lambda y: np.ones_like(y), POLICY.tau) == 0.0
