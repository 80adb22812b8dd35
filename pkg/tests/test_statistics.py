import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import cfmgf.statistics as stats
from cfmgf.errors import BadParameter, ExponentOverflow, GammaTooSmall
from cfmgf.quadrature import integrate_u, kernel_integrals
from cfmgf.sampling import AlternativeSpec, draw
from cfmgf.standardize import ScaledResiduals, scaled_residuals
from cfmgf.statistics import (Family, WeightConfig, hw_stat, hw_values, kernel_c,
                              limit_check_t, limit_check_ttilde, mean_w_norm, moment_summary,
                              sigma2_closed, t_stat, t_tilde_stat, t_values, ttilde_values,
                              u_process)

# Gauss-Hermite integrals (order 40) of U_n^2 w and U_n w for the X10 fixture at gamma = 2,
# and of the HW integrand for X8 at beta = 0.5. Frozen from the quadrature oracle.
ORACLE_T_X10 = 0.09385899239713123
ORACLE_TT_X10 = -0.09334186758347784
ORACLE_HW_X8 = 0.03423081108602117
# 2d- and d-dimensional quadrature of the limit kernel, keyed by (d, gamma)
ORACLE_CONSTANTS = {
    (1, 1.5): (0.03913783490402473, 0.5761291159770754),
    (1, 2.0): (0.009230184991112505, 0.15096515268092547),
    (1, 3.0): (0.00121271656226919, 0.026930997332706604),
    (2, 1.5): (0.21932454224643044, 3.179184360546397),
    (2, 2.0): (0.03870433098466399, 0.6806784082777878),
    (2, 3.0): (0.003387251617705493, 0.09599310885968806),
    (3, 1.5): (0.8646417021199782, 12.098043001457187),
    (3, 2.0): (0.11413325573300045, 2.094076015373017),
    (3, 3.0): (0.006652457692755687, 0.23296383422970696),
}


@pytest.fixture
def y10(x10):
    return scaled_residuals(x10)


class TestUProcess:
    def test_origin(self, y10):
        assert u_process(y10, np.zeros(2)) == 0.0

    def test_parity_for_symmetric_set(self, rng):
        half = rng.standard_normal((5, 2))
        y = ScaledResiduals.from_raw(np.vstack([half, -half]))
        t = rng.standard_normal(2)
        assert u_process(y, t) == pytest.approx(u_process(y, -t), rel=1e-13)

    def test_direct_summation(self):
        y = ScaledResiduals.from_raw(np.array([[-1.2], [0.1], [0.4], [0.7]]))
        t = 0.7
        r = sum(math.cos(t * v) for v in (-1.2, 0.1, 0.4, 0.7)) / 4
        m = sum(math.exp(t * v) for v in (-1.2, 0.1, 0.4, 0.7)) / 4
        assert u_process(y, np.array([t])) == pytest.approx(2 * (r * m - 1), rel=1e-14)

    def test_batch_matches_single(self, y10, rng):
        ts = rng.standard_normal((6, 2))
        np.testing.assert_allclose(u_process(y10, ts), [u_process(y10, t) for t in ts])

    def test_overflow(self, y10):
        with pytest.raises(ExponentOverflow):
            u_process(y10, np.array([1000.0, 1000.0]))


class TestClosedFormsAgainstOracle:
    def test_t_frozen(self, y10):
        res = t_stat(y10, WeightConfig(2.0, 2))
        assert res.statistic == pytest.approx(ORACLE_T_X10, rel=1e-10)
        assert res.scaled == pytest.approx((2 / math.pi) * ORACLE_T_X10, rel=1e-10)
        assert res.family is Family.T

    def test_ttilde_frozen(self, y10):
        res = t_tilde_stat(y10, WeightConfig(2.0, 2))
        assert res.statistic == pytest.approx(ORACLE_TT_X10, rel=1e-10)
        s = math.sqrt(sigma2_closed(WeightConfig(2.0, 2)))
        assert res.scaled == pytest.approx(ORACLE_TT_X10 / s, rel=1e-10)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("gamma", [1.5, 2.0, 3.0])
    def test_random_datasets(self, seed, gamma):
        r = np.random.default_rng(seed)
        d = 1 + seed % 2
        n = 6 + seed
        y = scaled_residuals(r.standard_normal((n, d)) ** 3)
        assert t_values(y, [gamma])[0] == pytest.approx(integrate_u(y, gamma, 2), rel=1e-6)
        assert ttilde_values(y, [gamma])[0] == pytest.approx(integrate_u(y, gamma, 1), rel=1e-6)

    def test_ttilde_two_point_by_hand(self):
        y = scaled_residuals(np.array([[-1.0], [1.0]]))
        for g in (0.5, 2.0, 7.0):
            hand = math.sqrt(math.pi / g) * math.sqrt(2) * (math.cos(1 / (2 * g)) - 1)
            assert ttilde_values(y, [g])[0] == pytest.approx(hand, rel=1e-13)

    def test_hw_frozen(self, x8):
        y = scaled_residuals(x8)
        assert hw_stat(y, 0.5).statistic == pytest.approx(ORACLE_HW_X8, rel=1e-9)


class TestNumerics:
    def test_block_size_does_not_matter(self, y10, monkeypatch):
        ref = t_values(y10, [1.5, 2.0, 50.0])
        monkeypatch.setattr(stats, "_BLOCK_ENTRIES", 7)
        np.testing.assert_allclose(t_values(y10, [1.5, 2.0, 50.0]), ref, rtol=1e-12)

    def test_fast_and_stable_paths_agree(self, y10, monkeypatch):
        ref = t_values(y10, [1.5, 2.0, 4.0])
        monkeypatch.setattr(stats, "_FACTOR_GAMMA", 0.0)
        np.testing.assert_allclose(t_values(y10, [1.5, 2.0, 4.0]), ref, rtol=1e-10)

    def test_many_gammas_match_single(self, y10):
        gs = [1.1, 2.0, 30.0]
        np.testing.assert_allclose(t_values(y10, gs), [t_values(y10, [g])[0] for g in gs],
                                   rtol=1e-13)

    def test_overflow_small_gamma(self, rng):
        x = rng.standard_normal((30, 2))
        x[0] = [40.0, -40.0]
        y = scaled_residuals(x)
        with pytest.raises(ExponentOverflow):
            t_values(y, [1e-3])
        with pytest.raises(ExponentOverflow):
            ttilde_values(y, [1e-3])

    def test_bad_weight(self):
        with pytest.raises(BadParameter):
            WeightConfig(0.0, 2)
        with pytest.raises(BadParameter):
            hw_values(ScaledResiduals.from_raw(np.zeros((3, 1))), [-1.0])


class TestMoments:
    def test_two_point(self):
        m = moment_summary(scaled_residuals(np.array([[-1.0], [1.0]])))
        assert (m.b1, m.b1_mrs, m.b2) == (0.0, 0.0, 1.0)

    def test_brute_force(self, rng):
        y = scaled_residuals(rng.exponential(size=(9, 3)))
        n = y.n
        b1 = sum((y.y[j] @ y.y[k]) ** 3 for j in range(n) for k in range(n)) / n**2
        mrs = sum((y.y[j] @ y.y[k]) * (y.y[j] @ y.y[j]) * (y.y[k] @ y.y[k])
                  for j in range(n) for k in range(n)) / n**2
        b2 = sum((y.y[j] @ y.y[j]) ** 2 for j in range(n)) / n
        m = moment_summary(y)
        assert m.b1 == pytest.approx(b1, rel=1e-12)
        assert m.b1_mrs == pytest.approx(mrs, rel=1e-12)
        assert m.b2 == pytest.approx(b2, rel=1e-12)

    def test_normal_kurtosis(self, rng):
        m = moment_summary(scaled_residuals(rng.standard_normal((20000, 3))))
        # sd of b2 under normality is sqrt(8 d (d+2) / n)
        assert abs(m.b2 - 15) < 4 * math.sqrt(8 * 15 / 20000)


class TestLimits:
    @pytest.mark.parametrize("seed", range(4))
    def test_t_limit(self, seed):
        y = scaled_residuals(np.random.default_rng(seed).exponential(size=(12, 1 + seed % 2)))
        gaps = []
        for g in (1e2, 1e3, 1e4):
            scaled, limit = limit_check_t(y, g)
            gaps.append(abs(scaled - limit) / abs(limit))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.01
        m = moment_summary(y)
        assert limit_check_t(y, 1e4)[1] == 2 * m.b1 + 3 * m.b1_mrs

    @pytest.mark.parametrize("seed", range(4))
    def test_ttilde_limit(self, seed):
        y = scaled_residuals(np.random.default_rng(seed).exponential(size=(12, 1 + seed % 2)))
        gaps = []
        for g in (1e2, 1e3, 1e4):
            scaled, limit = limit_check_ttilde(y, g)
            gaps.append(abs(scaled - limit) / abs(limit))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.01

    def test_symmetric_set_t_vanishes(self, rng):
        half = rng.standard_normal((6, 2))
        y = scaled_residuals(np.vstack([half, -half]))
        scaled, limit = limit_check_t(y, 1e4)
        assert limit == pytest.approx(0.0, abs=1e-12)
        assert abs(scaled) < 1e-3 * limit_check_t(scaled_residuals(rng.exponential(size=(12, 2))),
                                                  1e4)[1]

    def test_two_point_ttilde_limit(self):
        assert limit_check_ttilde(scaled_residuals(np.array([[-1.0], [1.0]])), 1e3)[1] == -2.0


class TestHW:
    def test_collapsed_points(self):
        for n, d, b in [(5, 1, 0.5), (7, 3, 1.5)]:
            v = hw_values(ScaledResiduals.from_raw(np.zeros((n, d))), [b])[0]
            expected = n * (1 - 2 * (1 + b * b) ** (-d / 2) + (1 + 2 * b * b) ** (-d / 2))
            assert v == pytest.approx(expected, rel=1e-13)
            assert v > 0

    def test_rotation_invariance(self, y10):
        th = 0.83
        q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        rot = ScaledResiduals.from_raw(y10.y @ q.T)
        assert hw_values(rot, [1.0])[0] == pytest.approx(hw_values(y10, [1.0])[0], rel=1e-12)


class TestConstants:
    @pytest.mark.parametrize("key", sorted(ORACLE_CONSTANTS))
    def test_against_frozen_oracle(self, key):
        d, g = key
        s2, mw = ORACLE_CONSTANTS[key]
        w = WeightConfig(g, d)
        assert sigma2_closed(w) == pytest.approx(s2, rel=1e-5)
        assert mean_w_norm(w) == pytest.approx(mw, rel=1e-4)

    def test_d1_gamma2_value(self):
        assert sigma2_closed(WeightConfig(2.0, 1)) == pytest.approx(9.23e-3, rel=1e-3)

    def test_vanish_at_infinity(self):
        for d in (1, 2, 5):
            assert sigma2_closed(WeightConfig(1e6, d)) < 1e-12
            assert abs(mean_w_norm(WeightConfig(1e6, d))) < 1e-6
            assert sigma2_closed(WeightConfig(1.01, d)) > 0

    def test_gamma_too_small(self):
        with pytest.raises(GammaTooSmall):
            sigma2_closed(WeightConfig(1.0, 2))
        with pytest.raises(GammaTooSmall):
            mean_w_norm(WeightConfig(0.5, 2))

    def test_ttilde_scaled_nan_below_threshold(self, y10):
        assert math.isnan(t_tilde_stat(y10, WeightConfig(0.8, 2)).scaled)


class TestKernel:
    def test_origin(self):
        assert kernel_c(np.zeros(3), np.zeros(3)) == 0.0

    def test_variants_differ_by_inner_product(self, rng):
        s, t = rng.standard_normal((2, 10, 3))
        np.testing.assert_allclose(kernel_c(s, t, "garch") - kernel_c(s, t, "iid"),
                                   np.sum(s * t, axis=1), atol=1e-12)

    def test_symmetric(self, rng):
        s, t = rng.standard_normal((2, 10, 2))
        np.testing.assert_array_equal(kernel_c(s, t), kernel_c(t, s))

    def test_garch_sigma2_equals_iid(self):
        a = kernel_integrals(2.0, 2, "iid").sigma2
        b = kernel_integrals(2.0, 2, "garch").sigma2
        assert abs(a - b) < 1e-8

    def test_unknown_variant(self):
        with pytest.raises(BadParameter):
            kernel_c(np.ones(2), np.ones(2), "other")


@st.composite
def datasets(draw_):
    seed = draw_(st.integers(0, 2**32 - 1))
    d = draw_(st.integers(1, 3))
    n = draw_(st.integers(d + 2, 14))
    r = np.random.default_rng(seed)
    x = r.standard_t(3, size=(n, d))
    while True:
        a = r.standard_normal((d, d))
        if np.linalg.cond(a) < 1e3:
            break
    gamma = draw_(st.sampled_from([0.5, 1.0, 1.5, 2.0, 5.0, 20.0]))
    return x, a, r.standard_normal(d) * 5, gamma


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(datasets())
    def test_affine_invariance(self, case):
        x, a, b, g = case
        y0, y1 = scaled_residuals(x), scaled_residuals(x @ a.T + b)
        t0, t1 = t_values(y0, [g])[0], t_values(y1, [g])[0]
        assert abs(t1 - t0) <= 1e-8 * abs(t0) + 1e-13
        s0, s1 = ttilde_values(y0, [g])[0], ttilde_values(y1, [g])[0]
        assert abs(s1 - s0) <= 1e-8 * abs(s0) + 1e-13

    @settings(max_examples=50, deadline=None)
    @given(datasets())
    def test_nonnegative(self, case):
        x, _, _, g = case
        y = scaled_residuals(x)
        assert t_values(y, [g])[0] >= -1e-9
        assert hw_values(y, [g])[0] >= -1e-9
        assert moment_summary(y).b1 >= 0


class TestConsistency:
    def test_heavy_tails_grow(self):
        spec = AlternativeSpec("t", 2, (3.0,))
        med = []
        for n in (25, 100):
            vals = []
            for r in range(10):
                x = draw(spec, n, np.random.default_rng([n, r]))
                vals.append(t_values(scaled_residuals(x), [2.0])[0] / n)
            med.append(np.median(vals))
        assert med[1] > med[0] > 0
