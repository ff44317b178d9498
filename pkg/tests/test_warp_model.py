"""翘曲函数、稳定性函数 Φ 与条件判定"""

import math

import numpy as np
import pytest

from warp_model import (
    ConditionStatus, WarpSpecError, _ads_horizon, alternate_form_value, f_prime, f_value,
    glw_condition, make_preset, make_warp_spec, phi_stability,
)


def sign_change_spec():
    """f² = 1 + r + r³，Φ = (r - 1/r)/2，在 r = 1 处变号"""
    return make_warp_spec("1 + r + r^3", r_min=0.1, r_max=10.0, name="sign-change")


class TestWarpFunction:
    def test_counterexample_metric_value(self, paper_spec):
        assert f_value(paper_spec, 1.0) == pytest.approx(math.sqrt(1.5), rel=1e-15)

    def test_euclidean(self, euclidean_spec):
        assert f_value(euclidean_spec, 3.0) == 1.0
        assert f_prime(euclidean_spec, 3.0) == 0.0

    def test_space_form_derivative_through_square_root(self, spaceform_spec):
        assert f_prime(spaceform_spec, 2.0) == pytest.approx(2.0 / math.sqrt(5.0), rel=1e-14)

    def test_f_form_derivative(self):
        spec = make_warp_spec("sqrt(1 + r^2)", is_squared=False)
        assert spec.f_prime(2.0) == pytest.approx(2.0 / math.sqrt(5.0), rel=1e-14)
        assert spec.f_squared(2.0) == pytest.approx(5.0, rel=1e-15)

    def test_outside_interval(self, paper_spec):
        with pytest.raises(WarpSpecError):
            f_value(paper_spec, 20.0)

    def test_non_positive_f_squared_is_rejected(self):
        with pytest.raises(WarpSpecError):
            make_warp_spec("1 - r", r_min=0.5, r_max=2.0)

    def test_non_positive_f_is_rejected(self):
        with pytest.raises(WarpSpecError):
            make_warp_spec("r - 1", is_squared=False, r_min=0.5, r_max=2.0)

    @pytest.mark.parametrize("kwargs", [
        {"n": 0},
        {"r_min": 2.0, "r_max": 1.0},
        {"r_min": 0.0},
        {"anchor": 0.2, "r_min": 0.1},
    ])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(WarpSpecError):
            make_warp_spec("1 + r^2", **kwargs)

    def test_unbound_parameter(self):
        with pytest.raises(WarpSpecError):
            make_warp_spec("1 + m*r")

    def test_unknown_preset_and_parameter(self):
        with pytest.raises(WarpSpecError):
            make_preset("sphere")
        with pytest.raises(WarpSpecError):
            make_preset("paper", parameters={"kappa": 1.0})

    def test_describe(self, paper_spec):
        described = paper_spec.describe()
        assert described["name"] == "paper"
        assert described["expression"] == "1 + m/(r+1)"
        assert described["parameters"] == {"m": 1.0}
        assert described["form"] == "f2"
        assert described["n"] == 2


class TestAdsPreset:
    def test_horizon_is_root(self):
        horizon = _ads_horizon(1.0, 1.0)
        assert horizon + horizon ** 3 == pytest.approx(1.0, abs=1e-14)

    def test_validity_interval_starts_outside_horizon(self, ads_spec):
        horizon = _ads_horizon(1.0, 1.0)
        assert ads_spec.r_min == pytest.approx(1.05 * horizon, rel=1e-15)
        assert ads_spec.anchor == ads_spec.r_min
        assert ads_spec.f_squared(ads_spec.r_min) > 0.0

    def test_narrower_interval_keeps_anchor(self):
        spec = make_preset("ads", r_min=1.1)
        assert spec.r_min == 1.1
        assert spec.anchor == pytest.approx(1.05 * _ads_horizon(1.0, 1.0), rel=1e-15)

    def test_negative_parameters_rejected(self):
        with pytest.raises(WarpSpecError):
            make_preset("ads", parameters={"m": -1.0})


class TestPhi:
    def test_euclidean_is_zero(self, euclidean_spec):
        radii = np.linspace(0.1, 10.0, 50)
        np.testing.assert_array_equal(phi_stability(euclidean_spec, radii), 0.0)

    def test_counterexample_value(self, paper_spec):
        assert phi_stability(paper_spec, 1.0) == pytest.approx(-0.625, rel=1e-14)

    @pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
    def test_counterexample_closed_form(self, m):
        spec = make_preset("paper", parameters={"m": m})
        for r in np.linspace(spec.r_min, spec.r_max, 100):
            expected = -m / (2 * r * (r + 1) ** 2) - m / (r ** 2 * (r + 1))
            assert abs(phi_stability(spec, r) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_ads_closed_form(self):
        spec = make_preset("ads", r_min=1.1)
        for r in np.linspace(1.1, 10.0, 100):
            expected = 3.0 / (2.0 * r ** 3)
            assert abs(phi_stability(spec, r) - expected) <= 1e-12 * max(1.0, expected)

    def test_space_form_vanishes(self, spaceform_spec):
        radii = np.linspace(spaceform_spec.r_min, spaceform_spec.r_max, 200)
        assert np.max(np.abs(phi_stability(spaceform_spec, radii))) <= 1e-12

    def test_condition_identity(self, preset_spec):
        for r in np.linspace(preset_spec.r_min, preset_spec.r_max, 200):
            lhs = r ** 2 * phi_stability(preset_spec, r)
            alternate = alternate_form_value(preset_spec, r)
            assert abs(lhs - (1.0 - alternate.value)) <= 1e-10 * max(1.0, abs(lhs))
            assert alternate.r_squared_phi == pytest.approx(lhs, rel=1e-10, abs=1e-10)


class TestAlternateForm:
    def test_euclidean(self, euclidean_spec):
        form = alternate_form_value(euclidean_spec, 2.0)
        assert form.value == 1.0
        assert form.upper_holds and form.lower_holds

    def test_counterexample(self, paper_spec):
        form = alternate_form_value(paper_spec, 1.0)
        assert form.value == pytest.approx(1.625, rel=1e-15)
        assert form.phi_prime == pytest.approx(math.sqrt(1.5), rel=1e-15)
        assert form.phi_double_prime == pytest.approx(-0.125, rel=1e-15)
        assert not form.upper_holds

    def test_space_form_equality_case(self, spaceform_spec):
        for r in (0.5, 1.0, 4.0):
            assert alternate_form_value(spaceform_spec, r).value == pytest.approx(1.0, abs=1e-12)


class TestCondition:
    def test_euclidean_holds(self):
        report = glw_condition(make_preset("euclidean", r_min=0.1, r_max=10.0))
        assert report.status is ConditionStatus.HOLDS
        assert report.violations == []

    def test_counterexample_violated_everywhere(self):
        report = glw_condition(make_preset("paper", r_min=0.1, r_max=10.0))
        assert report.status is ConditionStatus.VIOLATED
        assert report.violations == [(0.1, 10.0)]
        assert report.min_phi < 0.0

    def test_ads_holds(self):
        report = glw_condition(make_preset("ads", r_min=1.1, r_max=10.0))
        assert report.status is ConditionStatus.HOLDS

    def test_violation_end_is_refined_by_bisection(self):
        report = glw_condition(sign_change_spec())
        assert len(report.violations) == 1
        lo, hi = report.violations[0]
        assert lo == 0.1
        assert hi == pytest.approx(1.0, abs=1e-8)

    def test_tolerance_shifts_the_boundary(self):
        report = glw_condition(sign_change_spec(), tol=0.1)
        lo, hi = report.violations[0]
        assert hi == pytest.approx(-0.1 + math.sqrt(1.01), abs=1e-8)

    def test_monotone_in_tolerance(self):
        spec = sign_change_spec()
        widths = []
        for tol in (0.0, 0.1, 1.0, 5.0):
            report = glw_condition(spec, tol=tol)
            widths.append(sum(hi - lo for lo, hi in report.violations))
        assert all(a >= b for a, b in zip(widths, widths[1:]))
        assert glw_condition(spec, tol=5.0).status is ConditionStatus.HOLDS

    def test_sub_interval(self):
        report = glw_condition(sign_change_spec(), interval=(2.0, 5.0))
        assert report.status is ConditionStatus.HOLDS
        assert report.interval == (2.0, 5.0)

    def test_bad_scan_arguments(self):
        spec = sign_change_spec()
        with pytest.raises(WarpSpecError):
            glw_condition(spec, interval=(3.0, 3.0))
        with pytest.raises(WarpSpecError):
            glw_condition(spec, interval=(0.01, 3.0))
        with pytest.raises(WarpSpecError):
            glw_condition(spec, grid_size=1)
        with pytest.raises(WarpSpecError):
            glw_condition(spec, tol=-1.0)

    def test_report_serializes(self):
        data = glw_condition(sign_change_spec()).to_dict()
        assert data["status"] == "VIOLATED"
        assert data["grid_size"] == 512
        assert len(data["violations"]) == 1
