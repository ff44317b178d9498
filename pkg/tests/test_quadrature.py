"""复合 Gauss-Legendre 积分"""

import math

import numpy as np
import pytest

from quadrature import Quadrature, QuadratureError, integrate, integrate_segments


class TestQuadrature:
    def test_points_are_cached_and_read_only(self):
        points, weights = Quadrature.get_points(16)
        assert Quadrature.get_points(16)[0] is points
        assert weights.sum() == pytest.approx(2.0, rel=1e-15)
        with pytest.raises(ValueError):
            points[0] = 0.0

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            Quadrature.get_points(0)

    def test_composite_nodes_stay_inside(self):
        nodes, weights = Quadrature.composite_nodes(0.0, 1.0, 4, 8)
        assert nodes.min() > 0.0 and nodes.max() < 1.0
        assert weights.sum() == pytest.approx(1.0, rel=1e-15)

    def test_polynomial(self):
        assert integrate(lambda x: 5 * x ** 4, 0.0, 2.0) == pytest.approx(32.0, rel=1e-14)

    def test_smooth_function(self):
        assert integrate(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)

    def test_endpoints_are_never_evaluated(self):
        def interior_only(x):
            assert np.all((x > 0.0) & (x < 2.0))
            return x

        assert integrate(interior_only, 0.0, 2.0) == pytest.approx(2.0, rel=1e-14)

    def test_non_convergence(self):
        with pytest.raises(QuadratureError):
            integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, max_panels=64)

    def test_segments_match_single_integrals(self):
        upper = np.array([0.5, 1.0, 2.5])
        batch = integrate_segments(lambda t: t ** 2 / np.sqrt(1.0 + t ** 2), 0.25, upper)
        for value, b in zip(batch, upper):
            single = integrate(lambda t: t ** 2 / np.sqrt(1.0 + t ** 2), 0.25, b)
            assert value == pytest.approx(single, rel=1e-13)

    def test_segments_keep_shape(self):
        upper = np.full((2, 3), 1.0)
        assert integrate_segments(np.cos, 0.0, upper).shape == (2, 3)
