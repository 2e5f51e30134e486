"""Unit tests for the singular initial value problem.

Tests cover:
- Smooth extension conditions and singular initial data
- The p-system and its A/B/C decomposition
- Recursion matrices and their determinants
- Series coefficients, the hybrid solve and model matching
- Reconstruction of the NK structure
"""

import numpy as np
import pytest

from nearly_kahler.config import settings
from nearly_kahler.errors import DomainError
from nearly_kahler.models.homogeneous import (
    ModelId,
    s3xs3_singular_h,
    sphere6_singular_h,
)
from nearly_kahler.singular.singular_ivp import (
    ExtensionJet,
    a_jacobian,
    abc_pointwise,
    b_q_jacobian,
    extension_conditions,
    extension_jet_from_state,
    initial_p,
    jacobians_at_origin,
    l_matrix,
    l_matrix_determinant,
    matched_model,
    p_system_rhs,
    reconstruct_nk,
    reflected_determinant,
    series_coefficients,
    singular_initial_state,
    singular_limit_condition,
    solve_singular_ivp,
    stability_limit,
)

# A point away from the singular orbit with Delta != 0
P_SAMPLE = np.array([0.2, -0.5, 0.1, 0.3])
Q_SAMPLE = np.array([0.05, 0.4, -0.2, 0.1])


class TestExtension:
    """Tests for the extension conditions and initial data."""

    def test_initial_state(self):
        x = singular_initial_state(0.25)
        assert x.s == 0.0
        assert np.array_equal(x.a, np.zeros(4))
        assert np.allclose(x.b, [0.25, -0.375, -0.25, 0.375])

    @pytest.mark.parametrize("c1", [1 / 9, 0.25, 0.7])
    def test_limit_condition_holds(self, c1):
        x = singular_initial_state(c1)
        assert singular_limit_condition(x.b) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("c1", [1 / 9, 0.25, 0.7])
    def test_initial_data_extends(self, c1):
        report = extension_conditions(
            extension_jet_from_state(singular_initial_state(c1))
        )
        assert report.ok
        assert report.nondegenerate
        assert report.even_derivatives_vanish
        assert report.beta_sum == pytest.approx(0.0, abs=1e-12)
        assert report.alpha1_relation == pytest.approx(0.0, abs=1e-12)

    def test_odd_value_blocks_extension(self):
        jet = ExtensionJet(
            alpha=[-1.0, 0.1, 0.0, 0.0, 0.0], beta=[0, 0.1, 0.6, 0, -0.35]
        )
        report = extension_conditions(jet)
        assert not report.odd_vanish
        assert not report.ok

    def test_alpha4_blocks_extension(self):
        jet = ExtensionJet(
            alpha=[-1.0, 0.0, 0.0, 0.2, 0.0], beta=[0, 0.1, -0.4, 0, 0.15]
        )
        report = extension_conditions(jet)
        assert report.odd_vanish
        assert not report.alpha4_zero
        assert not report.ok

    def test_jet_shape_checked(self):
        with pytest.raises(DomainError):
            ExtensionJet(alpha=np.zeros(4), beta=np.zeros(5))

    def test_stability_limit_s3xs3(self):
        jet = extension_jet_from_state(singular_initial_state(1 / 9))
        assert stability_limit(jet) == pytest.approx(-1 / 9)

    def test_initial_p(self):
        assert np.allclose(initial_p(1 / 9), [1 / 9, -1 / 9, 0.0, 1 / 9])

    @pytest.mark.parametrize("c1", [0.0, -0.1])
    def test_nonpositive_c1(self, c1):
        with pytest.raises(DomainError):
            singular_initial_state(c1)
        with pytest.raises(DomainError):
            initial_p(c1)


class TestPSystem:
    """Tests for the p-system right-hand side."""

    def test_decomposition_matches_rhs(self):
        s = 0.3
        a, b, c = abc_pointwise(s, P_SAMPLE, Q_SAMPLE)
        assert np.allclose(
            a / s**2 + b / s + c, p_system_rhs(s, P_SAMPLE, Q_SAMPLE)
        )

    def test_a_jacobian_matches_differences(self):
        step = 1e-6
        numeric = np.column_stack(
            [
                (
                    abc_pointwise(1.0, P_SAMPLE + step * e, Q_SAMPLE)[0]
                    - abc_pointwise(1.0, P_SAMPLE - step * e, Q_SAMPLE)[0]
                )
                / (2 * step)
                for e in np.eye(4)
            ]
        )
        assert np.allclose(a_jacobian(P_SAMPLE), numeric, atol=1e-6)

    def test_b_is_linear_in_q(self):
        b0 = abc_pointwise(1.0, P_SAMPLE, np.zeros(4))[1]
        b1 = abc_pointwise(1.0, P_SAMPLE, Q_SAMPLE)[1]
        assert np.allclose(b1 - b0, b_q_jacobian(P_SAMPLE) @ Q_SAMPLE)

    def test_a_vanishes_at_origin(self):
        a, _, _ = abc_pointwise(1.0, initial_p(0.25), np.zeros(4))
        assert np.allclose(a, 0.0)

    def test_singular_at_zero(self):
        with pytest.raises(DomainError):
            p_system_rhs(0.0, P_SAMPLE, Q_SAMPLE)


class TestRecursionMatrix:
    """Tests for l_matrix and its determinants."""

    @pytest.mark.parametrize("c1", [1 / 9, 0.25, 0.7])
    def test_determinant_closed_form(self, c1):
        for n in range(201):
            exact = l_matrix_determinant(n)
            det = np.linalg.det(l_matrix(n, c1))
            assert abs(det - exact) / abs(exact) < 1e-10, n

    def test_first_determinant(self):
        assert l_matrix_determinant(0) == pytest.approx(270.0)

    @pytest.mark.parametrize("c1", [1 / 9, 0.25])
    def test_reflected_determinant(self, c1):
        assert reflected_determinant(0) == pytest.approx(8.0)
        for n in range(201):
            exact = reflected_determinant(n)
            det = np.linalg.det(2 * np.eye(4) - l_matrix(n, c1))
            assert abs(det - exact) / abs(exact) < 1e-10, n

    def test_jacobians_only_touch_first_row(self):
        d_a, d_b = jacobians_at_origin(0.25)
        assert not d_a[1:].any()
        assert np.allclose(np.diag(d_b)[1:], -2.0)

    def test_negative_n(self):
        with pytest.raises(DomainError):
            l_matrix(-1, 0.25)


class TestSeries:
    """Tests for series_coefficients."""

    def test_second_coefficient_s3xs3(self):
        series = series_coefficients(1 / 9, order=6)
        assert np.allclose(series.taylor[2], [0, 8 / 81, 8 / 81, -2 / 81])
        assert np.allclose(series.coeffs[1], 2 * series.taylor[2])

    def test_odd_coefficients_vanish(self):
        series = series_coefficients(0.25, order=6)
        assert not series.taylor[1::2].any()

    def test_matches_s3xs3_closed_form(self):
        series = series_coefficients(1 / 9)
        for s in (0.02, 0.1):
            assert np.allclose(
                series.h_vector(s), s3xs3_singular_h(np.array(s)), atol=1e-12
            )

    def test_matches_sphere_closed_form(self):
        series = series_coefficients(0.25)
        assert np.allclose(
            series.h_vector(0.05), sphere6_singular_h(np.array(0.05)), atol=1e-12
        )

    def test_residual_small(self, loose_settings):
        series = series_coefficients(0.25)
        assert np.max(np.abs(series.residual(0.05))) < 1e-8

    def test_residual_s3xs3_low_order(self):
        series = series_coefficients(1 / 9, order=10)
        assert np.max(np.abs(series.residual(0.01))) < 1e-12

    def test_radius_positive(self):
        assert series_coefficients(0.25, order=8).radius_estimate > 0

    def test_order_checked(self):
        with pytest.raises(DomainError):
            series_coefficients(0.25, order=0)


class TestSolve:
    """Tests for solve_singular_ivp and matched_model."""

    @pytest.mark.parametrize("c1", [1 / 9, 1 / 6, 0.25, 0.5])
    def test_series_agrees_with_integrator(self, c1):
        curve = solve_singular_ivp(c1, s_max=0.2, n_points=21)
        assert curve.meta["s_switch"] < 0.2
        assert curve.meta["handoff_mismatch"] <= 10 * settings.tol

    def test_s3xs3_recovered(self):
        curve = solve_singular_ivp(1 / 9, s_max=0.3, n_points=31)
        assert np.allclose(
            curve.states, s3xs3_singular_h(curve.grid), atol=1e-7
        )
        assert curve.meta["handoff_mismatch"] < 1e-8
        assert matched_model(curve) == ModelId.S3XS3

    def test_sphere_recovered(self):
        curve = solve_singular_ivp(0.25, s_max=0.3, n_points=31)
        assert np.allclose(
            curve.states, sphere6_singular_h(curve.grid), atol=1e-7
        )
        assert matched_model(curve) == ModelId.SPHERE6

    def test_generic_c1_unmatched(self):
        curve = solve_singular_ivp(0.18, s_max=0.2, n_points=21)
        assert matched_model(curve) is None
        assert curve.max_drift < 1e-8

    def test_negative_range_is_odd_image(self):
        forward = solve_singular_ivp(1 / 9, s_max=0.2, n_points=11)
        backward = solve_singular_ivp(1 / 9, s_max=-0.2, n_points=11)
        assert np.allclose(backward.states[:, :4], -forward.states[:, :4])
        assert np.allclose(backward.states[:, 4:], forward.states[:, 4:])

    def test_series_only_range(self):
        curve = solve_singular_ivp(1 / 9, s_max=0.01, n_points=5)
        assert curve.meta["steps"] == 0
        assert curve.meta["s_switch"] == pytest.approx(0.01)

    def test_meta(self):
        curve = solve_singular_ivp(0.25, s_max=0.1, order=10, n_points=5)
        assert curve.meta["c1"] == 0.25
        assert curve.meta["order"] == 10
        assert curve.mu == 2.0

    def test_zero_range(self):
        with pytest.raises(DomainError):
            solve_singular_ivp(0.25, s_max=0.0)


class TestReconstruction:
    """Tests for reconstruct_nk."""

    def test_s3xs3_structure(self):
        _, fcurve, report = reconstruct_nk(1 / 9, s_max=0.2, n_points=21)
        assert report.extension.ok
        assert report.stability_limit == pytest.approx(-1 / 9)
        assert report.stability_max == pytest.approx(-1 / 9, abs=1e-6)
        assert report.positivity_ok
        assert report.ok
        assert report.failures == []
        assert report.valid_s_max == pytest.approx(0.2)
        assert np.allclose(fcurve.f[:, 3], 0.0)

    def test_sphere_structure(self):
        _, _, report = reconstruct_nk(0.25, s_max=0.2, n_points=21)
        assert report.ok
        assert report.stability_max < 0
