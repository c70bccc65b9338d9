"""Fill- and release-phase passage laws against quadrature, root-finding,
and Monte Carlo oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from igdam import (
    DomainError,
    IGParams,
    Policy,
    ResolventDensity,
    cdf_w_lambda,
    eta,
    ig_cdf,
    lt_w_lambda,
    lt_w_tau_star,
    mean_var_w_tau_star,
    mean_w_lambda,
    pdf_w_tau_star,
    prob_w_tau_star_finite,
)
from igdam.passage_laws import cdf_w_lambda_printed_form

from conftest import sample_stats

STD = IGParams(1.0, 1.0)
BENCH = IGParams(2.0, 1.0)


class TestPolicy:
    def test_valid(self):
        p = Policy(lam=3.0, tau=1.0, M=2.0)
        assert p.gap == 2.0

    @pytest.mark.parametrize("lam,tau,M", [
        (1.0, 1.0, 1.0), (1.0, 2.0, 1.0), (2.0, -0.1, 1.0),
        (2.0, 1.0, 0.0), (math.inf, 1.0, 1.0),
    ])
    def test_rejects_bad(self, lam, tau, M):
        with pytest.raises(DomainError):
            Policy(lam=lam, tau=tau, M=M)


class TestEta:
    def test_supercritical_zero_at_zero(self):
        assert float(eta(BENCH, 1.0, 0.0)) == 0.0

    def test_subcritical_positive_at_zero(self):
        p = IGParams(0.5, 1.0)
        assert float(eta(p, 1.0, 0.0)) == pytest.approx(2.0 * 0.5 / 1.0, rel=1e-14)

    def test_matches_bisection_oracle(self):
        mu, s2, M, a = 2.0, 1.0, 1.0, 0.5

        def residual(e):
            return M * e - a - (math.sqrt(2.0 * e * s2 + mu * mu) - mu) / s2

        root = optimize.brentq(residual, 0.0, 100.0, xtol=1e-14, rtol=1e-15)
        assert float(eta(BENCH, M, a)) == pytest.approx(root, abs=1e-10)

    def test_equation_residual_over_grid(self):
        for a in np.linspace(0.0, 10.0, 41):
            e = float(eta(BENCH, 1.0, float(a)))
            res = 1.0 * e - float(a) - (math.sqrt(2.0 * e + 4.0) - 2.0) / 1.0
            assert abs(res) < 1e-10

    def test_strictly_increasing(self):
        a = np.linspace(0.0, 10.0, 101)
        e = eta(BENCH, 1.0, a)
        assert np.all(np.diff(e) > 0.0)


class TestFillTransform:
    def test_one_at_threshold(self):
        assert lt_w_lambda(STD, 2.0, 2.0, 0.7) == 1.0

    def test_one_at_zero_discount(self):
        assert lt_w_lambda(STD, 0.0, 2.0, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_rejects_start_above_threshold(self):
        with pytest.raises(DomainError):
            lt_w_lambda(STD, 2.5, 2.0, 0.5)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 1.5])
    def test_matches_resolvent_tail(self, alpha):
        res = ResolventDensity(STD, alpha)
        quad = alpha * res.tail_integral(2.0)
        assert lt_w_lambda(STD, 0.0, 2.0, alpha) == pytest.approx(quad, abs=1e-6)

    def test_matches_monte_carlo(self, fill_samples_gap2):
        w, _ = fill_samples_gap2
        mc, se = sample_stats(np.exp(-0.5 * w))
        assert abs(lt_w_lambda(STD, 0.0, 2.0, 0.5) - mc) < 3.0 * se

    def test_removable_pole_smooth(self):
        # alpha = 2 mu / sigma^2 where the printed denominator vanishes
        pole = 2.0
        v = lt_w_lambda(STD, 0.0, 1.5, pole)
        nearby = 0.5 * (lt_w_lambda(STD, 0.0, 1.5, pole + 1e-4)
                        + lt_w_lambda(STD, 0.0, 1.5, pole - 1e-4))
        assert v == pytest.approx(nearby, rel=1e-6)
        quad = pole * ResolventDensity(STD, pole).tail_integral(1.5)
        assert v == pytest.approx(quad, abs=1e-6)

    def test_no_overflow_at_large_gap(self):
        v = lt_w_lambda(IGParams(1.0, 1.0), 0.0, 400.0, 3.0)
        assert 0.0 <= v <= 1.0 and math.isfinite(v)

    @given(a1=st.floats(0.01, 4.0), a2=st.floats(0.01, 4.0))
    @settings(max_examples=40, deadline=None)
    def test_decreasing_in_discount(self, a1, a2):
        lo, hi = sorted((a1, a2))
        assert lt_w_lambda(STD, 0.0, 2.0, hi) <= lt_w_lambda(STD, 0.0, 2.0, lo) + 1e-12

    @given(x1=st.floats(0.0, 1.99), x2=st.floats(0.0, 1.99))
    @settings(max_examples=40, deadline=None)
    def test_increasing_in_start(self, x1, x2):
        lo, hi = sorted((x1, x2))
        assert lt_w_lambda(STD, lo, 2.0, 0.7) <= lt_w_lambda(STD, hi, 2.0, 0.7) + 1e-12

    def test_in_unit_interval(self):
        for a in (0.1, 1.0, 5.0, 50.0):
            v = lt_w_lambda(STD, 0.3, 2.0, a)
            assert 0.0 < v <= 1.0

    def test_slope_at_zero_matches_mean(self):
        # -d/dalpha at 0+ equals the mean passage time (Richardson)
        h = 1e-3
        d1 = (1.0 - lt_w_lambda(STD, 0.0, 2.0, h)) / h
        d2 = (1.0 - lt_w_lambda(STD, 0.0, 2.0, h / 10.0)) / (h / 10.0)
        extr = (10.0 * d2 - d1) / 9.0
        assert extr == pytest.approx(mean_w_lambda(STD, 0.0, 2.0), rel=1e-3)


class TestFillDistribution:
    def test_zero_at_time_zero(self):
        assert cdf_w_lambda(STD, 0.0, 1.0, 0.0) == 0.0

    def test_one_in_the_limit(self):
        assert cdf_w_lambda(STD, 0.0, 1.0, 500.0) == pytest.approx(1.0, abs=1e-12)

    def test_path_monotonicity_identity(self):
        # increasing paths make the passage cdf the increment upper tail
        v = cdf_w_lambda(STD, 0.0, 1.0, 1.0)
        assert v == pytest.approx(1.0 - ig_cdf(STD, 1.0, 1.0), abs=1e-14)

    def test_monotone_in_time(self):
        t = np.linspace(0.0, 20.0, 100)
        f = cdf_w_lambda(STD, 0.0, 1.0, t)
        assert np.all(np.diff(f) >= -1e-15) and np.all((0.0 <= f) & (f <= 1.0))

    def test_matches_empirical_cdf(self, fill_samples_gap2):
        w, _ = fill_samples_gap2
        w = np.sort(w)
        n = len(w)
        f = cdf_w_lambda(STD, 0.0, 2.0, w)
        d = max(np.max(f - np.arange(n) / n), np.max(np.arange(1, n + 1) / n - f))
        assert d < 1.628 / math.sqrt(n)  # 1% KS band

    def test_printed_form_agrees_only_at_unit_gap(self):
        # the erfc form without the sqrt-gap scaling coincides with the
        # identity-based cdf exactly when lam - x = 1 ...
        t = np.linspace(0.1, 8.0, 30)
        a = cdf_w_lambda(STD, 0.0, 1.0, t)
        b = cdf_w_lambda_printed_form(STD, 0.0, 1.0, t)
        assert np.max(np.abs(a - b)) < 1e-12
        # ... and deviates materially otherwise (pinned discrepancy)
        a4 = cdf_w_lambda(STD, 0.0, 4.0, t)
        b4 = cdf_w_lambda_printed_form(STD, 0.0, 4.0, t)
        assert np.max(np.abs(a4 - b4)) > 0.05


class TestFillMean:
    def test_zero_at_threshold(self):
        assert mean_w_lambda(STD, 2.0, 2.0) == 0.0

    def test_matches_resolvent_quadrature(self):
        res = ResolventDensity(STD, 0.0)
        quad, _ = integrate.quad(
            lambda w: float(res.density(w * w)) * 2.0 * w, 0.0, 1.0,
            limit=300, epsabs=1e-12, epsrel=1e-12)
        assert mean_w_lambda(STD, 0.0, 1.0) == pytest.approx(quad, abs=1e-6)

    def test_matches_monte_carlo(self, fill_samples_gap2):
        w, _ = fill_samples_gap2
        mc, se = sample_stats(w)
        # allow the documented +O(dt) crossing-detection bias on top of 3 SE
        assert abs(mean_w_lambda(STD, 0.0, 2.0) - mc) < 3.0 * se + 2e-3

    def test_large_gap_asymptote(self):
        h = 60.0
        assert mean_w_lambda(STD, 0.0, h) == pytest.approx(h * 1.0 + 0.5, rel=1e-10)


class TestReleaseTransform:
    def test_one_at_threshold(self):
        assert lt_w_tau_star(BENCH, 1.0, 1.0, 1.0, 0.4) == 1.0

    def test_rejects_start_below_threshold(self):
        with pytest.raises(DomainError):
            lt_w_tau_star(BENCH, 1.0, 0.5, 1.0, 0.4)

    def test_subcritical_finiteness_probability(self):
        p = IGParams(0.5, 1.0)
        v = prob_w_tau_star_finite(p, 1.0, 2.0, 1.0)
        assert v == pytest.approx(math.exp(-2.0 * 1.0 * (1.0 - 0.5) / 1.0), rel=1e-12)
        assert prob_w_tau_star_finite(BENCH, 1.0, 2.0, 1.0) == 1.0

    def test_matches_monte_carlo(self, release_samples):
        mc, se = sample_stats(np.exp(-0.3 * release_samples))
        assert abs(lt_w_tau_star(BENCH, 1.0, 2.0, 1.0, 0.3) - mc) < 3.0 * se

    def test_slope_at_zero_matches_mean(self):
        h = 1e-3
        d1 = (1.0 - lt_w_tau_star(BENCH, 1.0, 2.0, 1.0, h)) / h
        d2 = (1.0 - lt_w_tau_star(BENCH, 1.0, 2.0, 1.0, h / 10.0)) / (h / 10.0)
        extr = (10.0 * d2 - d1) / 9.0
        mean, _ = mean_var_w_tau_star(BENCH, 1.0, 2.0, 1.0)
        assert extr == pytest.approx(mean, rel=1e-3)


class TestReleaseDensity:
    def test_zero_before_drain_bound(self):
        assert pdf_w_tau_star(BENCH, 1.0, 2.0, 1.0, 0.5) == 0.0
        assert pdf_w_tau_star(BENCH, 1.0, 2.0, 1.0, 1.0) == 0.0

    def _mass(self, params, M, x, tau):
        t0 = (x - tau) / M
        val, _ = integrate.quad(
            lambda r: float(pdf_w_tau_star(params, M, x, tau, t0 + r * r)) * 2.0 * r,
            0.0, 2.0, limit=400, epsabs=1e-13, epsrel=1e-12)
        tail, _ = integrate.quad(
            lambda t: float(pdf_w_tau_star(params, M, x, tau, t)),
            t0 + 4.0, t0 + 600.0, limit=500, epsabs=1e-13, epsrel=1e-12)
        return val + tail

    def test_mass_supercritical(self):
        assert self._mass(BENCH, 1.0, 2.0, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_mass_subcritical_equals_finiteness(self):
        p = IGParams(0.5, 1.0)
        assert self._mass(p, 1.0, 2.0, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-6)


class TestReleaseMoments:
    def test_zero_at_threshold(self):
        assert mean_var_w_tau_star(BENCH, 1.0, 1.0, 1.0) == (0.0, 0.0)

    def test_closed_values(self):
        assert mean_var_w_tau_star(BENCH, 1.0, 2.0, 1.0) == pytest.approx((2.0, 1.0))

    def test_infinite_designation_subcritical(self):
        mean, var = mean_var_w_tau_star(IGParams(0.5, 1.0), 1.0, 2.0, 1.0)
        assert math.isinf(mean) and math.isinf(var)

    def test_matches_monte_carlo(self, release_samples):
        w = release_samples
        mc, se = sample_stats(w)
        assert abs(2.0 - mc) < 3.0 * se
        n = len(w)
        var = w.var(ddof=1)
        m4 = np.mean((w - w.mean()) ** 4)
        se_var = math.sqrt((m4 - var**2) / n)
        assert abs(1.0 - var) < 3.0 * se_var

    def test_variance_matches_density_quadrature_off_unit_rate(self):
        # distinguishes the correct variance scaling when M != 1: quadrature
        # of the passage density is the independent oracle
        p = IGParams(1.5, 0.8)
        M, x, tau = 2.0, 2.3, 1.0
        t0 = (x - tau) / M

        def moment(k):
            val, _ = integrate.quad(
                lambda r: (t0 + r * r) ** k
                * float(pdf_w_tau_star(p, M, x, tau, t0 + r * r)) * 2.0 * r,
                0.0, 8.0, limit=500, epsabs=1e-13, epsrel=1e-12)
            return val

        m1, m2 = moment(1), moment(2)
        mean, var = mean_var_w_tau_star(p, M, x, tau)
        assert m1 == pytest.approx(mean, rel=1e-9)
        assert m2 - m1 * m1 == pytest.approx(var, rel=1e-8)
