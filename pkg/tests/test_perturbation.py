"""扰动曲面：嵌入、法向、支撑函数、面积、两种体积与二阶系数"""

import math

import numpy as np
import pytest

from geometry import ball_volume, metric_components, sphere_area, unit_sphere_area
from perturbation import (
    PerturbationError, PerturbedSphere, StarShapeError, check_star_shaped, default_ladder,
    defect_ladder, embed, enclosed_volume_flux, enclosed_volume_radial, expected_gphi_coefficients,
    gphi_series_check, isometry_defect, noise_floor, radial_expansion_defect, sample_surface,
    support_function, support_function_via_rho, surface_area, volume_coefficient_analytic,
    volume_gap_coefficient,
)
from warp_model import WarpSpecError, make_preset, make_warp_spec

BASE_RADIUS = {"euclidean": 1.0, "spaceform": 1.0, "paper": 1.0, "ads": 2.0}


def tensor_product_area(ps, polar_nodes=400, azimuth_nodes=64):
    """
    n = 2 时在 (u₁, u₂) 全网格上拉回外围度量求面积：u₁ 用 Gauss-Legendre，u₂ 用周期梯形
    """
    x, w = np.polynomial.legendre.leggauss(polar_nodes)
    u1 = 0.5 * math.pi * x
    u2 = 2.0 * math.pi * np.arange(azimuth_nodes) / azimuth_nodes
    u1, u2 = np.meshgrid(u1, u2, indexing="ij")
    r, k = ps.r, ps.h1_coefficient
    point = np.stack([r * np.cos(u1) * np.cos(u2), r * np.cos(u1) * np.sin(u2),
                      r * np.sin(u1) + ps.eps + ps.eps ** 2 * k * np.sin(u1)], axis=-1)
    d_polar = np.stack([-r * np.sin(u1) * np.cos(u2), -r * np.sin(u1) * np.sin(u2),
                        (r + ps.eps ** 2 * k) * np.cos(u1)], axis=-1)
    d_azimuth = np.stack([-r * np.cos(u1) * np.sin(u2), r * np.cos(u1) * np.cos(u2),
                          np.zeros_like(u1)], axis=-1)
    radius = np.linalg.norm(point, axis=-1)
    unit = point / radius[..., None]
    stretch = 1.0 / ps.spec.f_squared(radius) - 1.0

    def pulled_back(v, w_):
        return np.sum(v * w_, axis=-1) + stretch * np.sum(v * unit, axis=-1) * np.sum(w_ * unit, axis=-1)

    density = np.sqrt(pulled_back(d_polar, d_polar) * pulled_back(d_azimuth, d_azimuth)
                      - pulled_back(d_polar, d_azimuth) ** 2)
    polar_weights = 0.5 * math.pi * w
    return float(np.sum(density * polar_weights[:, None]) * 2.0 * math.pi / azimuth_nodes)


class TestPerturbedSphere:
    def test_alpha_and_h1(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05)
        assert ps.alpha == pytest.approx(1.0 / 6.0, rel=1e-15)
        assert ps.h1_coefficient == pytest.approx(1.0 / 6.0, rel=1e-15)
        assert ps.without_h1().h1_coefficient == 0.0
        assert ps.with_eps(0.05) is ps
        assert ps.with_eps(0.01).eps == 0.01

    @pytest.mark.parametrize("eps", [0.2, -0.01, float("nan")])
    def test_eps_guard(self, paper_spec, eps):
        with pytest.raises(PerturbationError):
            PerturbedSphere(paper_spec, 1.0, eps)

    def test_cap_is_inclusive(self, paper_spec):
        assert PerturbedSphere(paper_spec, 1.0, 0.1).eps == 0.1

    def test_base_radius_inside_interval(self, paper_spec):
        with pytest.raises(WarpSpecError):
            PerturbedSphere(paper_spec, 50.0)

    def test_surface_must_stay_outside_anchor(self, ads_spec):
        with pytest.raises(PerturbationError):
            PerturbedSphere(ads_spec, 0.75, 0.07)

    def test_default_ladder(self):
        ladder = default_ladder(2.0)
        assert len(ladder) == 7
        assert ladder[0] == 2.0 / 16 and ladder[-1] == 2.0 / 1024
        with pytest.raises(ValueError):
            default_ladder(1.0, 6, 4)

    def test_noise_floor_scales(self):
        assert noise_floor(4.0) == pytest.approx(4.0 * 1e3 * np.finfo(float).eps)


class TestEmbedding:
    def test_north_pole_with_h1(self, paper_spec):
        point = embed(PerturbedSphere(paper_spec, 1.0, 0.05), 0.5 * math.pi)
        np.testing.assert_allclose(point, [0.0, 0.0, 1.0 + 0.05 + 0.0025 / 6.0], atol=1e-15)

    @pytest.mark.parametrize("include_h1", [True, False])
    def test_offset_follows_h1(self, paper_spec, include_h1):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05, include_h1=include_h1)
        u1 = -0.7
        assert float(ps.h1(math.sin(u1))) == (pytest.approx(math.sin(u1) / 6.0, rel=1e-15)
                                              if include_h1 else 0.0)
        point = embed(ps, u1)
        assert point[-1] == pytest.approx(math.sin(u1) + 0.05 + 0.0025 * float(ps.h1(math.sin(u1))),
                                          rel=1e-15)

    def test_zero_eps_is_round_sphere(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.5, 0.0)
        point = embed(ps, 0.3, [1.1])
        assert np.linalg.norm(point) == pytest.approx(1.5, rel=1e-15)

    def test_euclidean_is_a_translation(self, euclidean_spec):
        ps = PerturbedSphere(euclidean_spec, 1.0, 0.08)
        shift = embed(ps, -0.4, [2.0]) - embed(ps.with_eps(0.0), -0.4, [2.0])
        np.testing.assert_allclose(shift, [0.0, 0.0, 0.08], atol=1e-15)

    def test_too_many_angles(self, paper_spec):
        with pytest.raises(PerturbationError):
            embed(PerturbedSphere(paper_spec, 1.0), 0.1, [0.2, 0.3])


class TestSurfaceSample:
    @pytest.mark.parametrize("u1", [-1.2, -0.3, 0.0, math.pi / 4, 1.4])
    def test_normal_and_support(self, paper_spec, u1):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05)
        sample = sample_surface(ps, u1)
        assert sample.orthogonality_residual <= 1e-10
        assert sample.normalization_residual <= 1e-10
        assert sample.normal @ sample.point > 0.0
        assert sample.support == pytest.approx(support_function(ps, u1), rel=1e-12)

    def test_normal_raises_the_null_covector(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05)
        sample = sample_surface(ps, 0.4)
        lowered = metric_components(float(paper_spec.f_squared(sample.radius)), sample.point) @ sample.normal
        np.testing.assert_allclose(sample.tangents @ lowered, 0.0, atol=1e-13)

    def test_induced_metric_is_diagonal(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05)
        u1 = 0.6
        induced = sample_surface(ps, u1).induced_metric
        assert abs(induced[0, 1]) <= 1e-13
        assert induced[1, 1] == pytest.approx((math.cos(u1)) ** 2, rel=1e-13)

    def test_zero_eps_support_is_radius(self, preset_spec):
        r = BASE_RADIUS[preset_spec.name]
        sample = sample_surface(PerturbedSphere(preset_spec, r), 0.7)
        assert sample.support == pytest.approx(r, rel=1e-12)

    def test_poles_are_rejected(self, paper_spec):
        with pytest.raises(PerturbationError):
            sample_surface(PerturbedSphere(paper_spec, 1.0, 0.05), 0.5 * math.pi)

    def test_serializes(self, paper_spec):
        data = sample_surface(PerturbedSphere(paper_spec, 1.0, 0.05), 0.2).to_dict()
        assert set(data) >= {"point", "normal", "support", "area_density"}


class TestPointwise:
    def test_zero_eps(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.0)
        assert radial_expansion_defect(ps, 0.4) <= 1e-14
        assert support_function(ps, 0.4) == pytest.approx(1.0, rel=1e-13)
        assert support_function_via_rho(ps, 0.4) == pytest.approx(1.0, rel=1e-13)
        assert isometry_defect(ps) <= 1e-12

    @pytest.mark.parametrize("u1", [-1.0, 0.2, 1.3])
    def test_euclidean_translated_sphere(self, euclidean_spec, u1):
        ps = PerturbedSphere(euclidean_spec, 1.0, 0.06)
        assert support_function(ps, u1) == pytest.approx(1.0 + 0.06 * math.sin(u1), rel=1e-14)
        assert support_function_via_rho(ps, u1) == pytest.approx(1.0 + 0.06 * math.sin(u1), rel=1e-14)
        assert isometry_defect(ps) <= 1e-13

    def test_euclidean_radial_defect_is_third_order_remainder(self, euclidean_spec):
        ps = PerturbedSphere(euclidean_spec, 1.0, 0.05)
        u1 = 0.4
        exact = math.sqrt(1.0 + 2 * 0.05 * math.sin(u1) + 0.05 ** 2)
        expansion = 1.0 + 0.05 * math.sin(u1) + 0.05 ** 2 * math.cos(u1) ** 2 / 2.0
        assert radial_expansion_defect(ps, u1) == pytest.approx(abs(exact - expansion), rel=1e-9)

    def test_h1_reduces_isometry_defect(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.01)
        assert isometry_defect(ps) < isometry_defect(ps.without_h1())

    def test_defect_ladder(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0)
        ladder = default_ladder(1.0)
        points = defect_ladder(ps, "radial_expansion", ladder)
        assert [eps for eps, _ in points] == list(ladder)
        defects = [d for _, d in points]
        assert all(a > b for a, b in zip(defects, defects[1:]))
        with pytest.raises(ValueError):
            defect_ladder(ps, "curvature", ladder)


class TestArea:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_round_sphere(self, n):
        spec = make_preset("paper", n=n)
        area = surface_area(PerturbedSphere(spec, 1.3))
        assert area == pytest.approx(unit_sphere_area(n) * 1.3 ** n, rel=1e-10)

    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
    def test_euclidean_translation_preserves_area(self, euclidean_spec, eps):
        area = surface_area(PerturbedSphere(euclidean_spec, 1.0, eps))
        assert area == pytest.approx(4 * math.pi, rel=1e-10)

    @pytest.mark.parametrize("name", sorted(BASE_RADIUS))
    @pytest.mark.parametrize("include_h1", [True, False])
    def test_matches_tensor_product_oracle(self, name, include_h1):
        ps = PerturbedSphere(make_preset(name), BASE_RADIUS[name], 0.05 * BASE_RADIUS[name],
                             include_h1=include_h1)
        assert surface_area(ps) == pytest.approx(tensor_product_area(ps), rel=1e-10)

    def test_counterexample_area_changes_at_third_order(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0, 0.05)
        defect = abs(surface_area(ps) - sphere_area(paper_spec, 1.0))
        assert defect < 0.05 ** 2 * 4 * math.pi


class TestVolumes:
    def test_halving_eps_quarters_the_gap(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0)
        ball = ball_volume(paper_spec, 1.0)
        gaps = [enclosed_volume_flux(ps, eps) - ball for eps in (0.04, 0.02, 0.01)]
        assert all(gap > 0.0 for gap in gaps)
        for larger, smaller in zip(gaps, gaps[1:]):
            assert smaller / larger == pytest.approx(0.25, abs=5e-3)

    @pytest.mark.parametrize("name", sorted(BASE_RADIUS))
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_zero_eps_matches_ball(self, name, n):
        spec = make_preset(name, n=n)
        ps = PerturbedSphere(spec, BASE_RADIUS[name])
        ball = ball_volume(spec, ps.r)
        assert enclosed_volume_flux(ps) == pytest.approx(ball, rel=1e-10)
        assert enclosed_volume_radial(ps) == pytest.approx(ball, rel=1e-10)

    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
    def test_euclidean_volume_is_translation_invariant(self, euclidean_spec, eps):
        ps = PerturbedSphere(euclidean_spec, 1.0, eps)
        assert enclosed_volume_flux(ps) == pytest.approx(4 * math.pi / 3, rel=1e-10)
        assert enclosed_volume_radial(ps) == pytest.approx(4 * math.pi / 3, rel=1e-10)

    @pytest.mark.parametrize("name", ["paper", "spaceform", "ads"])
    @pytest.mark.parametrize("eps_ratio", [0.01, 0.05])
    def test_flux_and_radial_agree(self, name, eps_ratio):
        spec = make_preset(name, n=2)
        r = BASE_RADIUS[name]
        ps = PerturbedSphere(spec, r, eps_ratio * r)
        flux, radial = enclosed_volume_flux(ps), enclosed_volume_radial(ps)
        assert abs(flux - radial) <= 1e-8 * abs(flux)

    def test_star_shape_failure(self):
        spec = make_warp_spec("0.1")
        ps = PerturbedSphere(spec, 1.0, 0.5, eps_cap_ratio=1.0)
        with pytest.raises(StarShapeError) as info:
            check_star_shaped(ps)
        # ψ' ∝ 1 + sin u₁/2 - 9/8，sin u₁ < 1/4 处失效
        lo, hi = info.value.u_range
        assert lo < 0.0 < hi
        assert hi == pytest.approx(math.asin(0.25), abs=1e-2)
        with pytest.raises(StarShapeError):
            enclosed_volume_flux(ps)


class TestVolumeCoefficient:
    def test_analytic_values(self, paper_spec, spaceform_spec, euclidean_spec):
        expected = 0.625 * 4 * math.pi / (6 * 1.5 ** 1.5)
        assert volume_coefficient_analytic(paper_spec, 1.0) == pytest.approx(expected, rel=1e-13)
        assert abs(volume_coefficient_analytic(spaceform_spec, 1.0)) <= 1e-12
        assert volume_coefficient_analytic(euclidean_spec, 1.0) == 0.0
        assert volume_coefficient_analytic(make_preset("ads"), 2.0) < 0.0

    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_counterexample_coefficient(self, n, r):
        ps = PerturbedSphere(make_preset("paper", n=n), r)
        fit = volume_gap_coefficient(ps)
        assert fit.relative_discrepancy <= 1e-3
        assert np.all(fit.gaps > 0.0)
        assert fit.oracle_disagreement <= 1e-8
        assert not fit.noise_limited

    def test_ads_volume_decreases(self):
        fit = volume_gap_coefficient(PerturbedSphere(make_preset("ads"), 2.0))
        assert fit.c_analytic < 0.0
        assert np.all(fit.gaps < 0.0)
        assert fit.relative_discrepancy <= 1e-3

    def test_space_form_has_no_second_order_change(self, spaceform_spec):
        fit = volume_gap_coefficient(PerturbedSphere(spaceform_spec, 1.0))
        assert abs(fit.c_analytic) <= 1e-12
        assert abs(fit.c_meas) <= 1e-4

    def test_euclidean_gaps_vanish(self, euclidean_spec):
        fit = volume_gap_coefficient(PerturbedSphere(euclidean_spec, 1.0))
        assert np.max(np.abs(fit.gaps)) <= 1e-9
        assert fit.c_analytic == 0.0
        assert "noise_limited" in fit.to_dict()

    def test_requires_h1_and_enough_points(self, paper_spec):
        ps = PerturbedSphere(paper_spec, 1.0)
        with pytest.raises(PerturbationError):
            volume_gap_coefficient(ps.without_h1())
        with pytest.raises(PerturbationError):
            volume_gap_coefficient(ps, [0.05, 0.02, 0.01])
        with pytest.raises(PerturbationError):
            volume_gap_coefficient(ps, [0.2, 0.1, 0.05, 0.02, 0.01])


class TestSeries:
    def test_counterexample_coefficients(self, paper_spec):
        check = gphi_series_check(PerturbedSphere(paper_spec, 1.0), math.pi / 4)
        assert check.linear_error <= 1e-4
        assert check.quadratic_error <= 1e-4
        assert check.integrated_quadratic == pytest.approx(check.c_analytic, abs=1e-9)
        assert check.passed

    def test_euclidean_linear_coefficient(self, euclidean_spec):
        ps = PerturbedSphere(euclidean_spec, 1.0)
        linear, quadratic = expected_gphi_coefficients(ps, 0.5 * math.pi)
        assert linear == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert quadratic == pytest.approx(0.0, abs=1e-12)
        check = gphi_series_check(ps, 0.5 * math.pi - 1e-9)
        assert check.linear == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_equator_has_no_linear_term(self, paper_spec):
        linear, _ = expected_gphi_coefficients(PerturbedSphere(paper_spec, 1.0), 0.0)
        assert linear == 0.0

    def test_errors_are_relative_to_the_coefficient(self, paper_spec):
        check = gphi_series_check(PerturbedSphere(paper_spec, 1.0), math.pi / 4)
        assert abs(check.expected_linear) < 1.0
        assert check.linear_error == pytest.approx(
            abs(check.linear - check.expected_linear) / abs(check.expected_linear), rel=1e-12)
        assert check.quadratic_error == pytest.approx(
            abs(check.quadratic - check.expected_quadratic) / abs(check.expected_quadratic), rel=1e-12)

    def test_vanishing_coefficient_uses_natural_scale(self, paper_spec):
        check = gphi_series_check(PerturbedSphere(paper_spec, 1.0), 0.0)
        assert check.expected_linear == 0.0
        assert math.isfinite(check.linear_error)
        assert check.passed
