import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetsbm.errors import AssumptionViolation, DegeneratePattern
from hetsbm.hsbm import HsbmParams, pattern_family_a, sample_hsbm
from hetsbm.theory import (GainReport, SeparabilityInputs, classify_pattern, error_upper_bound,
                           gain_multi_gc_approx, gain_multi_gc_dense_limit, gain_multi_gc_exact,
                           gain_noisy_gc, gain_single_gc, mhat_power, mhat_power_differences,
                           pairwise_accuracy, pairwise_accuracy_baseline, multi_gc_gain_sum_bound,
                           q_frobenius_sq, separability, separability_matrix, std_normal_cdf)


def inputs(mhat, dbar=25.0, n=1000, sigma=0.6, gamma=math.sqrt(2), eta=None, delta=0.0):
    c = np.asarray(mhat).shape[0]
    return SeparabilityInputs(gamma=gamma, sigma=sigma, eta=np.full(c, 1 / c) if eta is None else eta,
                              dbar=dbar, mhat=mhat, n=n, delta=delta)


def random_stochastic(rng, c=5):
    m = rng.random((c, c)) + 0.05
    return m / m.sum(axis=1, keepdims=True)


class TestNormalCdf:
    @pytest.mark.parametrize("x", [-37.0, -8.0, -3.3, -1.0, 0.0, 0.3, 1.0, 2.5, 8.0])
    def test_against_mpmath(self, x):
        mpmath.mp.dps = 40
        assert abs(std_normal_cdf(x) - float(mpmath.ncdf(x))) <= 1e-12 * max(1.0, 0)
        if x < 0:
            rel = abs(std_normal_cdf(x) / float(mpmath.ncdf(x)) - 1)
            assert rel < 1e-12

    def test_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.0) == pytest.approx(0.841344746068543, abs=1e-12)
        assert 0 <= std_normal_cdf(-8.0) < 1e-15

    def test_symmetry_and_monotone(self):
        xs = np.linspace(-10, 10, 2001)
        v = std_normal_cdf(xs)
        assert np.all(np.diff(v) >= 0)
        np.testing.assert_allclose(std_normal_cdf(-xs), 1 - v, atol=1e-14)


class TestBaseline:
    def test_equal_priors(self):
        inp = inputs(np.eye(3), sigma=0.6)
        e_t, e_k = pairwise_accuracy_baseline(inp, 0, 1)
        assert e_t == e_k == pytest.approx(std_normal_cdf(inp.gamma / 1.2))

    def test_gamma1_sigma05(self):
        inp = inputs(np.eye(2), gamma=1.0, sigma=0.5)
        assert pairwise_accuracy_baseline(inp, 0, 1)[0] == pytest.approx(0.841344746068543, abs=1e-12)

    def test_limit(self):
        inp = inputs(np.eye(2), gamma=200.0, sigma=0.5, eta=np.array([0.7, 0.3]))
        e_t, e_k = pairwise_accuracy_baseline(inp, 0, 1)
        assert e_t == pytest.approx(1.0) and e_k == pytest.approx(1.0)

    def test_unequal_priors_favor_large_class(self):
        inp = inputs(np.eye(2), eta=np.array([2 / 3, 1 / 3]))
        e_t, e_k = pairwise_accuracy_baseline(inp, 0, 1)
        assert e_t > e_k

    def test_large_class_accuracy_monotone_in_snr(self):
        # E_t = Phi(x/2 + ln(2)/x) with x = gamma/sigma rises only once
        # x >= sqrt(2 ln 2); below that the prior term dominates and it falls
        eta = np.array([2 / 3, 1 / 3])
        x0 = math.sqrt(2 * math.log(2))
        sigma = 1.0

        def e_t(x):
            return pairwise_accuracy_baseline(inputs(np.eye(2), gamma=x, sigma=sigma, eta=eta), 0, 1)[0]
        above = [e_t(x) for x in np.linspace(x0, 8, 300)]
        assert np.all(np.diff(above) >= -1e-15)
        below = [e_t(x) for x in np.linspace(0.3, x0, 100)]
        assert np.all(np.diff(below) <= 1e-15)


class TestSeparability:
    def test_examples(self):
        inp = inputs(np.eye(2))
        assert separability(inp, 0, 1, 0.8, 0.8) == pytest.approx(0.8)
        inp = inputs(np.eye(2), eta=np.array([0.9, 0.1]))
        assert separability(inp, 0, 1, 1.0, 0.0) == pytest.approx(0.9)
        assert separability(inp, 0, 1, 0.3, 0.6) == separability(inp, 1, 0, 0.6, 0.3)

    @pytest.mark.parametrize("eta", [(0.5, 0.5), (0.8, 0.2), (0.95, 0.05)])
    def test_monotone_in_snr(self, eta):
        eta = np.array(eta)
        vals = []
        for g in np.linspace(0.1, 6, 300):
            inp = inputs(np.eye(2), gamma=g, eta=eta)
            vals.append(separability(inp, 0, 1, *pairwise_accuracy_baseline(inp, 0, 1)))
        assert np.all(np.diff(vals) >= -1e-12)


class TestSingleGain:
    def test_identical_rows_zero(self):
        m = pattern_family_a(0.25)
        m[1] = m[0]
        assert gain_single_gc(inputs(m)).gains[0, 1] == 0

    def test_a25_value(self):
        # sqrt(D/2) * ||m_0 - m_1||, with ||m_0 - m_1||^2 = 38/144 by hand
        g = gain_single_gc(inputs(pattern_family_a(0.25)))
        assert g.gains[0, 1] == pytest.approx(math.sqrt(25 / 2) * math.sqrt(38) / 12, rel=1e-12)
        assert g.gains[0, 1] == pytest.approx(1.8163, abs=1e-4)

    def test_equal_degree_identity(self):
        rng = np.random.default_rng(0)
        m = random_stochastic(rng)
        g = gain_single_gc(inputs(m, dbar=17.0)).gains
        for t in range(5):
            for k in range(5):
                assert g[t, k] == pytest.approx(math.sqrt(17 / 2) * np.linalg.norm(m[t] - m[k]),
                                                rel=1e-13, abs=1e-15)

    def test_sqrt_degree_scaling(self):
        m = pattern_family_a(0.2)
        base = gain_single_gc(inputs(m, dbar=25.0)).gains
        for s in (0.2, 2.0, 14.0):
            np.testing.assert_allclose(gain_single_gc(inputs(m, dbar=25.0 * s)).gains,
                                       math.sqrt(s) * base, rtol=1e-12, atol=1e-12)

    def test_unequal_degrees(self):
        m = np.eye(2)
        g = gain_single_gc(inputs(m, dbar=np.array([4.0, 9.0]))).gains
        assert g[0, 1] == pytest.approx(math.sqrt(4 + 9) / math.sqrt(2))

    def test_report_invariants(self):
        rep = gain_single_gc(inputs(pattern_family_a(0.18)), 1.2)
        np.testing.assert_array_equal(rep.gains, rep.gains.T)
        assert np.all(np.diag(rep.gains) == 0)
        assert rep.verdict == "bad"
        data = json.loads(rep.to_json())
        assert set(data) == {"kind", "gains", "varsigma", "verdict", "min_gain", "max_gain"}
        assert GainReport.from_dict(data).verdict == rep.verdict


class TestNoisyGain:
    def test_zero_noise_equals_single(self):
        m = pattern_family_a(0.2)
        np.testing.assert_array_equal(gain_noisy_gc(inputs(m)).gains, gain_single_gc(inputs(m)).gains)

    def test_strictly_decreasing(self):
        m = pattern_family_a(0.2)
        prev = None
        for d in (0.0, 0.005, 0.01, 0.05):
            g = gain_noisy_gc(inputs(m, delta=d)).gains
            if prev is not None:
                off = ~np.eye(5, dtype=bool)
                assert np.all(g[off] < prev[off])
            prev = g

    @pytest.mark.parametrize("delta", [0.003, 0.01, 0.1])
    def test_effective_degree(self, delta):
        m = pattern_family_a(0.25)
        inp = inputs(m, delta=delta)
        r = inp.gamma ** 2 * 25 / (2 * inp.sigma ** 2)
        eff = gain_single_gc(inputs(m, dbar=25 / (1 + r * delta ** 2))).gains
        np.testing.assert_allclose(gain_noisy_gc(inp).gains, eff, rtol=1e-12)

    def test_degree_spread(self):
        m = pattern_family_a(0.2)
        gain_noisy_gc(inputs(m, dbar=np.array([24, 25, 26, 25, 25.0]), delta=0.01))
        with pytest.raises(AssumptionViolation):
            gain_noisy_gc(inputs(m, dbar=np.array([20, 25, 30, 25, 25.0]), delta=0.01))


class TestMhatPower:
    def test_identity_and_l1(self):
        np.testing.assert_array_equal(mhat_power(np.eye(4), 7), np.eye(4))
        m = pattern_family_a(0.2)
        np.testing.assert_array_equal(mhat_power(m, 1), m)

    def test_doubly_stochastic_mixes(self):
        m = pattern_family_a(0.2)
        np.testing.assert_allclose(mhat_power(m, 200), 0.2, atol=1e-6)

    def test_row_stochastic(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = mhat_power(random_stochastic(rng), 37)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_differences_against_high_precision(self):
        rng = np.random.default_rng(2)
        m = random_stochastic(rng)
        l = 40
        mpmath.mp.dps = 80
        # rows renormalised at 80 digits: the float rows sum to 1 only within
        # an ulp, and that excess alone would put a non-decaying 1e-17 term
        # into every difference
        mm = mpmath.matrix(m.tolist())
        for i in range(5):
            row_sum = sum(mm[i, j] for j in range(5))
            for j in range(5):
                mm[i, j] /= row_sum
        mm = mm ** l
        diffs, log_scale = mhat_power_differences(m, l)
        for k, t in ((0, 1), (2, 4)):
            exact = np.array([float(mm[k, j] - mm[t, j]) for j in range(5)])
            np.testing.assert_allclose(diffs[k, t] * math.exp(log_scale), exact,
                                       rtol=1e-12, atol=1e-12 * np.abs(exact).max())


class TestMultiGain:
    def test_identity_pattern(self):
        for l in (2, 5, 30):
            g = gain_multi_gc_approx(inputs(np.eye(5)), l).gains
            off = g[~np.eye(5, dtype=bool)]
            np.testing.assert_allclose(off, 0.5 * 25 / math.log(1000), rtol=1e-12)

    def test_l1_delegates(self):
        m = pattern_family_a(0.25)
        np.testing.assert_array_equal(gain_multi_gc_approx(inputs(m), 1).gains,
                                      gain_single_gc(inputs(m)).gains)

    def test_identical_rows_zero_at_every_l(self):
        rng = np.random.default_rng(3)
        m = random_stochastic(rng)
        m[3] = m[1]
        for l in range(2, 20):
            assert gain_multi_gc_approx(inputs(m), l).gains[1, 3] == 0

    def test_degenerate(self):
        with pytest.raises(DegeneratePattern):
            gain_multi_gc_approx(inputs(np.full((4, 4), 0.25)), 3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_gain_sum_bound(self, seed):
        m = random_stochastic(np.random.default_rng(seed))
        bound = multi_gc_gain_sum_bound(5, 25.0, 1000)
        for l in range(2, 51):
            g = gain_multi_gc_approx(inputs(m), l).gains
            assert np.all(g[~np.eye(5, dtype=bool)] > 0)
            assert g.sum() >= bound * (1 - 1e-12)


class TestExactGain:
    @pytest.fixture(scope="class")
    @staticmethod
    def small():
        p = HsbmParams.synthetic(pattern_family_a(0.25), n=300, dbar=20)
        return p, sample_hsbm(p, 5)

    def test_q_at_l0(self, small):
        _, g = small
        assert q_frobenius_sq(g.adjacency, 0) == pytest.approx(2 * 300 ** 2 - 2 * 300)

    @pytest.mark.parametrize("l", [1, 2, 4])
    def test_centered_matches_pairwise(self, small, l):
        _, g = small
        a = q_frobenius_sq(g.adjacency, l)
        b = q_frobenius_sq(g.adjacency, l, method="pairwise")
        assert a == pytest.approx(b, rel=1e-10)

    def test_l1_close_to_single_gain(self, graph_a25, params_a25):
        ex = gain_multi_gc_exact(graph_a25, 1, mhat=params_a25.mhat).gains
        single = gain_single_gc(SeparabilityInputs.from_params(params_a25)).gains
        np.testing.assert_allclose(ex, single, rtol=0.05)

    def test_dense_regime_matches_dense_limit(self):
        p = HsbmParams.synthetic(pattern_family_a(0.25), n=1000, dbar=150)
        g = sample_hsbm(p, 1)
        inp = SeparabilityInputs.from_params(p)
        ex = gain_multi_gc_exact(g, 3, mhat=p.mhat).gains
        lim = gain_multi_gc_dense_limit(inp, 3).gains
        off = ~np.eye(5, dtype=bool)
        np.testing.assert_allclose(ex[off], lim[off], rtol=0.15)

    @pytest.mark.xfail(strict=True, reason="exact and approximate forms differ by a factor "
                       "of about sqrt(n) ln n / D at this size; see the decisions ledger")
    def test_exact_within_15pct_of_approx_at_l2(self, graph_a25, params_a25):
        ex = gain_multi_gc_exact(graph_a25, 2, mhat=params_a25.mhat).gains
        ap = gain_multi_gc_approx(SeparabilityInputs.from_params(params_a25), 2).gains
        off = ~np.eye(5, dtype=bool)
        np.testing.assert_allclose(ex[off], ap[off], rtol=0.15)

    def test_empirical_mhat_default_and_determinism(self, graph_a25):
        a = gain_multi_gc_exact(graph_a25, 2)
        b = gain_multi_gc_exact(graph_a25, 2)
        np.testing.assert_array_equal(a.gains, b.gains)
        assert a.kind == "multi_gc(2)"


class TestVerdicts:
    def test_examples(self):
        assert classify_pattern(np.full((3, 3), 2.0), 1.2) == "good"
        assert classify_pattern(gain_single_gc(inputs(pattern_family_a(0.25))), 1.2) == "good"
        assert classify_pattern(gain_single_gc(inputs(pattern_family_a(0.18))), 1.2) == "bad"
        g = np.array([[0, 1.0, 1.5], [1.0, 0, 1.5], [1.5, 1.5, 0]])
        assert classify_pattern(g, 1.2) == "mixed"

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            m = random_stochastic(rng)
            perm = rng.permutation(5)
            a = gain_single_gc(inputs(m), 1.2)
            b = gain_single_gc(inputs(m[np.ix_(perm, perm)]), 1.2)
            assert a.verdict == b.verdict
            np.testing.assert_allclose(b.gains, a.gains[np.ix_(perm, perm)], rtol=1e-12)


class TestErrorBound:
    def test_examples(self):
        assert error_upper_bound(np.ones((4, 4)), np.full(4, 0.25)) == 0
        assert error_upper_bound(np.array([[1, 0.9], [0.9, 1]]), [0.5, 0.5]) == pytest.approx(0.1)

    def test_separability_matrix_symmetric(self):
        s = separability_matrix(inputs(pattern_family_a(0.25), eta=np.array([.3, .2, .2, .2, .1])),
                                gain_single_gc(inputs(pattern_family_a(0.25))))
        np.testing.assert_allclose(s, s.T)
        assert np.all((s >= 0) & (s <= 1))

    def test_gain_scales_snr(self):
        inp = inputs(np.eye(2))
        a = pairwise_accuracy(inp, 0, 1, 2.0)[0]
        assert a == pytest.approx(pairwise_accuracy(inp.with_(gamma=2 * inp.gamma), 0, 1)[0])
