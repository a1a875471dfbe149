import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lossgap.analytic import (
    GapPoint,
    GaussianSpec,
    MinimumNotFound,
    Ordering,
    Regime,
    bayes_accuracy,
    compare_rob_std,
    drob_deps,
    dstd_dn,
    eps_regime,
    gap_curve,
    loss_gap_rob,
    loss_gap_rob_signed_log,
    loss_gap_std,
    regime_threshold,
    rob_minimum,
    rob_root,
    rob_root_bracket,
)

mpmath.mp.dps = 50

D100 = GaussianSpec(d=100, mu=1.0, sigma=1.0, gamma=1.0)
UNIT = GaussianSpec(d=1, mu=1.0, sigma=1.0, gamma=1.0)

specs = st.builds(
    GaussianSpec,
    d=st.integers(1, 500),
    mu=st.floats(0.05, 5.0),
    sigma=st.floats(0.05, 5.0),
    gamma=st.floats(0.05, 5.0),
)


def mp_rob(spec, n, eps):
    n, eps = mpmath.mpf(n), mpmath.mpf(eps)
    mu, s = mpmath.mpf(spec.mu), mpmath.mpf(spec.sigma)
    pref = spec.d * spec.gamma * s * mpmath.sqrt(2 / (n * mpmath.pi))
    e = lambda t: mpmath.exp(-n * t**2 / (2 * s**2))
    return pref * (e(eps + mu) + e(eps - mu) - e(mu))


def mc_gap(spec, n, eps, trials, seed):
    """Gap of the sign-thresholded model from the sufficient statistic u ~ N(mu, sigma^2/n)."""
    rng = np.random.default_rng(seed)
    u = rng.normal(spec.mu, spec.sigma / math.sqrt(n), size=(trials, spec.d))
    theta = spec.gamma * np.sign(u - eps * np.sign(u))
    gaps = (theta * (u - spec.mu)).sum(axis=1)
    return gaps.mean(), gaps.std(ddof=1) / math.sqrt(trials)


class TestClosedForms:
    def test_std_reference_value(self):
        assert loss_gap_std(D100, 1.0) == pytest.approx(48.39414490382867, rel=1e-15)

    def test_rob_eps_zero_is_std_bitwise(self):
        for n in np.geomspace(0.01, 1e4, 200):
            assert loss_gap_rob(D100, float(n), 0.0) == loss_gap_std(D100, float(n))

    @pytest.mark.parametrize("n,eps", [(1, 0.5), (2, 1.0), (5, 2.0), (0.3, 3.0), (10, 0.1), (40, 2.0), (7, 1.999)])
    def test_rob_matches_mpmath(self, n, eps):
        ref = mp_rob(D100, n, eps)
        assert loss_gap_rob(D100, n, eps) == pytest.approx(float(ref), rel=1e-12)

    def test_eps_two_mu_n1(self):
        # the (eps+mu)^2 = 9 mu^2 exponent, checked against mpmath
        assert loss_gap_rob(D100, 1, 2.0) == pytest.approx(0.8863696823876, rel=1e-12)

    @pytest.mark.parametrize("n,eps", [(1, 0.5), (2, 2.0), (5, 1.0), (3, 4.0), (1, 2.0)])
    def test_rob_matches_independent_mc(self, n, eps):
        mean, se = mc_gap(D100, n, eps, 40_000, seed=7)
        assert abs(mean - loss_gap_rob(D100, n, eps)) <= 4 * se

    def test_signed_log_agrees_where_representable(self):
        for n, eps in [(1, 0.5), (3, 3.0), (20, 0.5)]:
            sign, log_abs = loss_gap_rob_signed_log(D100, n, eps)
            r = loss_gap_rob(D100, n, eps)
            assert sign == (1 if r > 0 else -1)
            assert math.exp(log_abs) == pytest.approx(abs(r), rel=1e-12)

    def test_signed_log_deep_tail(self):
        sign, log_abs = loss_gap_rob_signed_log(D100, 1e4, 0.5)
        assert sign == 1 and math.isfinite(log_abs)
        assert loss_gap_rob(D100, 1e4, 0.5) == 0.0  # underflows in linear scale

    def test_signed_log_at_two_mu_past_underflow(self):
        # only e^{-a} survives at eps = 2 mu; a = 4n here
        n = 1000.0
        sign, log_abs = loss_gap_rob_signed_log(D100, n, 2.0)
        assert sign == 1
        assert log_abs == pytest.approx(math.log(100 * math.sqrt(2 / (n * math.pi))) - 4.5 * n, rel=1e-14)

    def test_signed_log_matches_mpmath_in_tail(self):
        for n, eps in [(500.0, 0.5), (2000.0, 1.9), (300.0, 3.0), (5000.0, 0.01)]:
            sign, log_abs = loss_gap_rob_signed_log(D100, n, eps)
            ref = mp_rob(D100, n, eps)
            assert sign == (1 if ref > 0 else -1)
            assert log_abs == pytest.approx(float(mpmath.log(abs(ref))), rel=1e-12)

    @pytest.mark.parametrize("bad_n", [0.0, -1.0, math.nan, math.inf])
    def test_rejects_bad_n(self, bad_n):
        with pytest.raises(ValueError):
            loss_gap_std(D100, bad_n)

    def test_rejects_negative_eps(self):
        with pytest.raises(ValueError):
            loss_gap_rob(D100, 1.0, -0.1)


class TestScaling:
    @given(specs, st.floats(0.05, 50), st.floats(0, 6), st.floats(0.1, 10))
    def test_linear_in_d_gamma(self, spec, n, eps, k):
        base = loss_gap_rob(spec, n, eps)
        scaled = loss_gap_rob(GaussianSpec(spec.d, spec.mu, spec.sigma, spec.gamma * k), n, eps)
        assert scaled == pytest.approx(k * base, rel=1e-12, abs=1e-300)

    @given(specs, st.floats(0.05, 50), st.floats(0, 6), st.floats(0.2, 5))
    def test_joint_scale_of_mu_sigma_eps(self, spec, n, eps, k):
        # (mu, sigma, eps) -> k*(mu, sigma, eps) leaves the exponents alone and scales by k
        base = loss_gap_rob(spec, n, eps)
        scaled = loss_gap_rob(GaussianSpec(spec.d, k * spec.mu, k * spec.sigma, spec.gamma), n, k * eps)
        assert scaled == pytest.approx(k * base, rel=1e-9, abs=1e-290)

    @given(specs, st.floats(0.01, 200), st.floats(0.0, 10.0))
    def test_std_positive_and_above_rob_when_eps_large(self, spec, n, eps):
        assert loss_gap_std(spec, n) > 0 or n * spec.mu**2 / spec.sigma**2 > 1400
        if eps > 2 * spec.mu:
            assert loss_gap_rob(spec, n, eps) <= loss_gap_std(spec, n)


class TestDerivatives:
    def test_dstd_dn_central_difference(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            spec = GaussianSpec(int(rng.integers(1, 200)), rng.uniform(0.2, 3), rng.uniform(0.2, 3), rng.uniform(0.2, 3))
            n = rng.uniform(0.05, 50) * (spec.sigma / spec.mu) ** 2
            h = 1e-5 * n
            fd = (loss_gap_std(spec, n + h) - loss_gap_std(spec, n - h)) / (2 * h)
            assert dstd_dn(spec, n) == pytest.approx(fd, rel=1e-6)

    def test_dstd_dn_negative(self):
        for n in np.geomspace(1e-3, 300, 100):
            assert dstd_dn(D100, float(n)) < 0

    def test_drob_deps_mpmath_derivative(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 60:
            n, eps = rng.uniform(0.1, 20), rng.uniform(0.01, 4)
            if 0 < eps < 1 and abs(n - regime_threshold(UNIT, eps)) < 0.05 * regime_threshold(UNIT, eps):
                continue
            ref = mpmath.diff(lambda e: mp_rob(D100, n, e), eps)
            assert drob_deps(D100, n, eps) == pytest.approx(float(ref), rel=1e-9, abs=1e-250)
            checked += 1


class TestRegime:
    def test_threshold_value(self):
        assert regime_threshold(UNIT, 0.5) == pytest.approx(math.log(3), rel=1e-15)

    def test_threshold_small_eps_limit(self):
        assert regime_threshold(UNIT, 1e-8) == pytest.approx(1.0, rel=1e-12)

    def test_threshold_domain(self):
        for eps in (0.0, 1.0, 2.0):
            with pytest.raises(ValueError):
                regime_threshold(UNIT, eps)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 20))
    def test_regime_matches_derivative_sign(self, eps, n):
        star = regime_threshold(UNIT, eps)
        assume(abs(n - star) > 1e-6 * star)
        got = eps_regime(UNIT, n, eps)
        want = Regime.DECREASING_IN_EPS if drob_deps(UNIT, n, eps) < 0 else Regime.INCREASING_IN_EPS
        assert got.kind is want
        assert got.threshold == star

    @given(st.floats(1.0, 1.99), st.floats(0.01, 50))
    def test_always_decreasing_between_mu_and_two_mu(self, eps, n):
        assert eps_regime(UNIT, n, eps).kind is Regime.ALWAYS_DECREASING
        assert drob_deps(UNIT, n, eps) <= 0

    def test_eps_zero_rejected(self):
        with pytest.raises(ValueError):
            eps_regime(UNIT, 1.0, 0.0)


class TestRootAndMinimum:
    def test_root_inside_bracket(self):
        root = rob_root(UNIT, 3.0)
        lo, hi = root.bracket
        assert lo == pytest.approx(0.092420, abs=1e-6) and hi == pytest.approx(0.462098, abs=1e-6)
        assert lo < root.n0 < hi
        assert abs(loss_gap_rob(UNIT, root.n0, 3.0)) <= 1e-10

    def test_no_root_up_to_two_mu(self):
        assert rob_root(UNIT, 2.0) is None
        assert rob_root(UNIT, 0.5) is None
        with pytest.raises(ValueError):
            rob_root_bracket(UNIT, 2.0)

    @given(st.floats(2.05, 30), st.floats(0.2, 5), st.floats(0.2, 5))
    @settings(max_examples=60)
    def test_root_is_sign_change(self, ratio, mu, sigma):
        spec = GaussianSpec(3, mu, sigma)
        eps = ratio * mu
        n0 = rob_root(spec, eps).n0
        s_lo, _ = loss_gap_rob_signed_log(spec, n0 * (1 - 1e-6), eps)
        s_hi, _ = loss_gap_rob_signed_log(spec, n0 * (1 + 1e-6), eps)
        assert s_lo == 1 and s_hi == -1

    def test_minimum_against_mpmath(self):
        m = rob_minimum(UNIT, 3.0)
        ref = mpmath.findroot(lambda n: mpmath.diff(lambda t: mp_rob(UNIT, t, 3.0), n), m.n1)
        assert m.n1 == pytest.approx(float(ref), abs=1e-7)
        assert m.n1 > rob_root(UNIT, 3.0).n0
        assert m.value < 0

    def test_minimum_ceiling(self):
        with pytest.raises(MinimumNotFound):
            rob_minimum(UNIT, 3.0, n_ceiling=0.5)

    def test_minimum_domain(self):
        with pytest.raises(ValueError):
            rob_minimum(UNIT, 2.0)


class TestOrdering:
    def test_two_mu_std_greater(self):
        assert all(compare_rob_std(D100, n, 2.0) is Ordering.STD_GREATER for n in range(1, 101))

    def test_eps_zero_equal(self):
        assert compare_rob_std(D100, 3, 0.0) is Ordering.EQUAL

    @given(st.floats(0.01, 200), st.floats(0.0, 6.0))
    def test_agrees_with_mpmath_difference(self, n, eps):
        diff = mp_rob(UNIT, n, eps) - mp_rob(UNIT, n, 0)
        got = compare_rob_std(UNIT, n, eps)
        scale = abs(mp_rob(UNIT, n, 0))
        if abs(diff) > 1e-10 * scale:
            want = Ordering.ROB_GREATER if diff > 0 else Ordering.STD_GREATER
            assert got is want


class TestMisc:
    def test_bayes_accuracy(self):
        assert bayes_accuracy(UNIT) == pytest.approx(0.8413447460685429, abs=1e-15)
        assert bayes_accuracy(GaussianSpec(4, 0.5, 1.0)) == bayes_accuracy(UNIT)

    def test_gap_curve(self):
        pts = gap_curve(D100, [1, 2, 5], 0.5)
        assert [p.analytic_gap for p in pts] == [loss_gap_rob(D100, n, 0.5) for n in (1, 2, 5)]
        assert pts[0].z is None

    def test_gap_point_z(self):
        assert GapPoint(1, 0, 2.0, 3.0, 0.5, 10).z == pytest.approx(2.0)
        with pytest.raises(ValueError):
            GapPoint(1, 0, 2.0, 3.0)

    @pytest.mark.parametrize("kw", [dict(d=0), dict(mu=0.0), dict(sigma=-1.0), dict(gamma=math.nan), dict(d=1.5)])
    def test_spec_validation(self, kw):
        base = dict(d=2, mu=1.0, sigma=1.0, gamma=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            GaussianSpec(**base)
