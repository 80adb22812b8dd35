import math

import numpy as np
import pytest

from cfmgf.errors import BadParameter, DimensionTooLarge, NonFinite
from cfmgf.quadrature import QuadratureGrid, integrate, integrate_u, kernel_integrals
from cfmgf.standardize import scaled_residuals


class TestGrid:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("gamma", [0.5, 2.0, 7.0])
    def test_weights_sum(self, d, gamma):
        grid = QuadratureGrid.build(gamma, d, order=12)
        assert grid.weights.sum() == pytest.approx((math.pi / gamma) ** (d / 2), rel=1e-12)
        assert grid.d == d

    def test_too_many_dimensions(self):
        with pytest.raises(DimensionTooLarge):
            QuadratureGrid.build(2.0, 4)

    def test_bad_gamma(self):
        with pytest.raises(BadParameter):
            QuadratureGrid.build(0.0, 1)


class TestIntegrate:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_second_moment(self, d):
        g = 1.7
        grid = QuadratureGrid.build(g, d, order=10)
        val = integrate(lambda t: np.sum(t * t, axis=1), grid)
        assert val == pytest.approx(d / (2 * g) * (math.pi / g) ** (d / 2), rel=1e-12)

    def test_cos_square(self):
        g = 2.0
        grid = QuadratureGrid.build(g, 1)
        kappa = math.sqrt(math.pi / g) * math.cos(math.atan(1 / g) / 2) / (1 + 1 / g**2) ** 0.25
        assert integrate(lambda t: np.cos(t[:, 0] ** 2), grid) == pytest.approx(kappa, rel=1e-10)

    def test_scalar_mode(self):
        grid = QuadratureGrid.build(1.0, 2, order=8)
        a = integrate(lambda t: np.cos(t[:, 0]) * t[:, 1] ** 2, grid)
        b = integrate(lambda t: math.cos(t[0]) * t[1] ** 2, grid, vectorized=False)
        assert a == pytest.approx(b, rel=1e-14)

    def test_non_finite(self):
        grid = QuadratureGrid.build(1.0, 1, order=4)
        with pytest.raises(NonFinite):
            integrate(lambda t: np.full(len(t), np.nan), grid)


class TestRefinement:
    @pytest.mark.parametrize("gamma", [1.5, 3.0])
    def test_order_doubling_is_stable(self, x10, gamma):
        y = scaled_residuals(x10)
        for power in (1, 2):
            a = integrate_u(y, gamma, power, order=40)
            b = integrate_u(y, gamma, power, order=80)
            assert abs(a - b) < 1e-8 * abs(b)


class TestKernelIntegrals:
    def test_gamma_guard(self):
        with pytest.raises(BadParameter):
            kernel_integrals(1.0, 1)

    def test_dimension_guard(self):
        with pytest.raises(DimensionTooLarge):
            kernel_integrals(2.0, 4)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_variants_share_sigma2(self, d):
        a = kernel_integrals(1.5, d, "iid")
        b = kernel_integrals(1.5, d, "garch")
        assert abs(a.sigma2 - b.sigma2) < 1e-8
        assert b.mean_w_norm > a.mean_w_norm
