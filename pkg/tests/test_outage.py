import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import erlang_cdf, hypoexp_cdf_mp
from uavpower.outage import (CLOSED_FORM, STABLE_FALLBACK, HypoExp, coefficients, outage,
                             outage_mc, stable_cdf, survival, user_outage)

rate_sets = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6, unique=True).filter(
    lambda r: all(abs(a - b) > 1e-3 * max(a, b) for i, a in enumerate(r) for b in r[:i]))


class TestHypoExpType:
    @pytest.mark.parametrize("rates", [(), (1.0, -2.0), (1.0, 1.0), (math.inf,)])
    def test_invalid(self, rates):
        with pytest.raises(ValueError):
            HypoExp(rates)


class TestSurvival:
    def test_single_exponential(self):
        assert survival(HypoExp((2.0,)), 1.0) == pytest.approx(math.exp(-2), rel=1e-15)

    def test_two_terms(self):
        expected = 2 * math.exp(-1) - math.exp(-2)
        assert survival(HypoExp((1.0, 2.0)), 1.0) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.600424, abs=1e-6)

    @given(rate_sets)
    def test_at_zero(self, rates):
        assert survival(HypoExp(tuple(rates)), 0.0) == 1.0

    @given(rate_sets)
    def test_coefficients_sum_to_one(self, rates):
        a = coefficients(HypoExp(tuple(rates)))
        assert math.fsum(a) == pytest.approx(1.0, rel=1e-9)

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            survival(HypoExp((1.0,)), -1.0)


class TestOutage:
    def test_zero_threshold(self):
        assert outage(HypoExp((1.0, 3.0)), 0.0).epsilon == 0.0

    def test_exponential_median(self):
        assert outage(HypoExp((1.0,)), math.log(2)).epsilon == pytest.approx(0.5, rel=1e-15)

    def test_three_rates_small_s(self):
        res = outage(HypoExp((1.0, 2.0, 3.0)), 0.1)
        assert res.epsilon == pytest.approx(float(hypoexp_cdf_mp((1, 2, 3), 0.1)), rel=1e-12)
        # Leading order l1 l2 l3 s^3 / 3!
        assert res.epsilon == pytest.approx(1e-3, rel=0.15)

    def test_complement_of_survival(self):
        d = HypoExp((0.3, 1.7, 4.0))
        assert outage(d, 0.9).epsilon + survival(d, 0.9) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("rates,s", [
        ((1.0, 1.01, 1.0201, 1.030301), 1e-3),
        ((2.0, 2.02, 2.0402, 2.060602, 2.08120802, 2.1020201), 2e-2),
        ((1.0, 1e3, 1e6), 1e-7),
        ((5.0, 5.05), 1e-6),
    ])
    def test_small_outage_matches_high_precision(self, rates, s):
        ref = hypoexp_cdf_mp(rates, s)
        got = outage(HypoExp(rates), s).epsilon
        assert abs(got - ref) <= 1e-6 * ref

    def test_ill_conditioned_uses_fallback(self):
        res = outage(HypoExp((1.0, 1.0 + 1e-8)), 1.0)
        assert res.method == STABLE_FALLBACK
        assert res.epsilon == pytest.approx(float(erlang_cdf(2, 1.0, 1.0)), rel=1e-6)

    def test_well_conditioned_uses_closed_form(self):
        assert outage(HypoExp((1.0, 2.0)), 1.0).method == CLOSED_FORM

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-4, 1e2), st.floats(1e-3, 1e3))
    def test_scaling_invariance(self, rates, s, c):
        d = HypoExp(tuple(rates))
        scaled = HypoExp(tuple(r / c for r in rates))
        a, b = outage(d, s).epsilon, outage(scaled, c * s).epsilon
        assume(a > 1e-290)
        assert b == pytest.approx(a, rel=1e-9)

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-4, 1e2), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, rates, s, rnd):
        shuffled = list(rates)
        rnd.shuffle(shuffled)
        a = outage(HypoExp(tuple(rates)), s).epsilon
        b = outage(HypoExp(tuple(shuffled)), s).epsilon
        assert b == pytest.approx(a, rel=1e-9, abs=1e-300)

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-3, 10.0))
    def test_strictly_increasing_in_s(self, rates, s):
        d = HypoExp(tuple(rates))
        lo, hi = outage(d, s).epsilon, outage(d, s * 1.01).epsilon
        assume(1e-280 < lo and hi < 1 - 1e-9)
        assert hi > lo

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-3, 10.0), st.data())
    def test_strictly_decreasing_in_each_power(self, rates, s, data):
        k = data.draw(st.integers(0, len(rates) - 1))
        more_power = list(rates)
        more_power[k] = rates[k] / 1.01  # rate = 1 / (P g)
        assume(all(abs(more_power[k] - r) > 1e-6 * r for i, r in enumerate(rates) if i != k))
        base = outage(HypoExp(tuple(rates)), s).epsilon
        assume(1e-280 < base < 1 - 1e-9)
        assert outage(HypoExp(tuple(more_power)), s).epsilon < base

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-3, 10.0), st.floats(1e-3, 1e3))
    def test_extra_link_lowers_outage(self, rates, s, new_rate):
        assume(all(abs(new_rate - r) > 1e-3 * r for r in rates))
        base = outage(HypoExp(tuple(rates)), s).epsilon
        assume(1e-280 < base < 1 - 1e-9)
        assert outage(HypoExp((*rates, new_rate)), s).epsilon < base


class TestStableCdf:
    def test_single_rate(self):
        for lam, s in [(1.0, 0.5), (3.0, 2.0), (1e-3, 1.0)]:
            assert stable_cdf(HypoExp((lam,)), s) == pytest.approx(-math.expm1(-lam * s), rel=1e-12)

    def test_erlang_limit(self):
        got = stable_cdf(HypoExp((1.0, 1.0 + 1e-8)), 1.0)
        assert got == pytest.approx(1 - 2 * math.exp(-1), rel=1e-6)

    def test_converges_to_erlang(self):
        errs = [abs(stable_cdf(HypoExp((1.0, 1.0 + d)), 1.0) - (1 - 2 * math.exp(-1)))
                for d in (1e-2, 1e-4, 1e-6)]
        assert errs[0] > errs[1] > errs[2]

    def test_two_rates(self):
        assert stable_cdf(HypoExp((1.0, 2.0)), 1.0) == pytest.approx(
            1 - (2 * math.exp(-1) - math.exp(-2)), rel=1e-12)
        assert stable_cdf(HypoExp((1.0, 2.0)), 1.0) == pytest.approx(0.399576, abs=1e-6)

    @settings(max_examples=100)
    @given(rate_sets, st.floats(1e-3, 10.0))
    def test_agrees_with_closed_form(self, rates, s):
        d = HypoExp(tuple(rates))
        ref = float(hypoexp_cdf_mp(rates, s))
        assume(ref > 1e-250)
        assert stable_cdf(d, s) == pytest.approx(ref, rel=1e-6)


class TestMonteCarlo:
    def test_median(self, rng):
        p, se = outage_mc(HypoExp((1.0,)), math.log(2), 1_000_000, rng)
        assert abs(p - 0.5) <= 0.0015
        assert se == pytest.approx(5e-4, rel=1e-2)

    def test_zero_threshold(self, rng):
        assert outage_mc(HypoExp((1.0, 2.0)), 0.0, 10_000, rng)[0] == 0.0

    def test_two_rates(self, rng):
        p, se = outage_mc(HypoExp((1.0, 2.0)), 1.0, 2_000_000, rng)
        assert abs(p - outage(HypoExp((1.0, 2.0)), 1.0).epsilon) <= 4 * se

    def test_needs_enough_samples(self, rng):
        with pytest.raises(ValueError):
            outage_mc(HypoExp((1.0,)), 1.0, 10, rng)


class TestUserOutage:
    def test_no_power(self):
        assert user_outage(np.zeros(6), np.ones(6), 1e-9).epsilon == 1.0

    def test_median(self):
        s = 3e-12
        g = 2e-10
        p = s / math.log(2) / g
        res = user_outage([p, 0.0], [g, 1e-9], s)
        assert res.epsilon == pytest.approx(0.5, rel=1e-12)

    def test_invalid_sensitivity(self):
        with pytest.raises(ValueError):
            user_outage([1.0], [1.0], 0.0)

    def test_single_uav_layout_full_power_regression(self):
        from uavpower.config import get_scenario
        from uavpower.env import link_gains

        sc = get_scenario("single_uav")
        g = link_gains(np.array([(750.0, 750.0, 100.0)]), sc.bs_array(), sc.channel,
                       np.zeros((1, 6), bool))[0]
        # 60-digit closed form on the same rates; far below Monte Carlo reach.
        assert user_outage(np.ones(6), g, sc.sensitivity).epsilon == pytest.approx(
            4.806130423766547e-20, rel=1e-9)

    def test_single_uav_layout_reduced_power_monte_carlo(self, rng):
        from uavpower.channel import link_rates
        from uavpower.config import get_scenario
        from uavpower.env import link_gains

        sc = get_scenario("single_uav")
        g = link_gains(np.array([(750.0, 750.0, 100.0)]), sc.bs_array(), sc.channel,
                       np.zeros((1, 6), bool))[0]
        p = np.full(6, 4e-4)
        eps = user_outage(p, g, sc.sensitivity).epsilon
        assert eps == pytest.approx(0.2690084955827932, rel=1e-9)
        est, se = outage_mc(HypoExp(tuple(link_rates(p, g))), sc.sensitivity, 1_000_000, rng)
        assert abs(est - eps) <= 4 * se
