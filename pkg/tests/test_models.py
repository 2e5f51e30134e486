"""Unit tests for the closed-form homogeneous models.

Tests cover:
- Regular ranges and mu values
- Hand-differentiated derivatives against central differences
- h-system data at the base points
- The rescaled sphere and the singular-orbit h-curves
"""

import math

import numpy as np
import pytest

from nearly_kahler.errors import DomainError
from nearly_kahler.models.homogeneous import (
    MODEL_MU,
    MODEL_RANGE,
    SINGULAR_C1,
    ModelId,
    model_curve,
    model_f,
    model_h_point,
    model_jet2,
    s3xs3_singular_h,
    singular_model_curve,
    sphere6_rescaled_f,
    sphere6_rescaled_jet2,
    sphere6_singular_h,
)
from nearly_kahler.ode.nk_ode import f_system_residual

STEP = 1e-6


def central_difference(func, t: float) -> np.ndarray:
    return (func(t + STEP) - func(t - STEP)) / (2 * STEP)


class TestRanges:
    """Tests for model metadata and range checks."""

    def test_mu_values(self):
        assert MODEL_MU[ModelId.SPHERE6] == 1.0
        assert MODEL_MU[ModelId.TWISTOR_CP3] == 2.0
        assert MODEL_MU[ModelId.S3XS3] == 2.0

    def test_out_of_range(self, model_id):
        lo, hi = MODEL_RANGE[model_id]
        for t in (lo, hi, hi + 0.1, -0.1):
            with pytest.raises(DomainError):
                model_f(model_id, t)

    def test_accepts_string_id(self):
        assert model_f("S3xS3", 0.2).mu == 2.0

    def test_curve_range_checked(self):
        with pytest.raises(DomainError):
            model_curve(ModelId.S3XS3, np.array([0.1, 1.0]))


class TestDerivatives:
    """Closed-form derivatives against central differences."""

    def test_first_derivatives(self, model_id):
        lo, hi = MODEL_RANGE[model_id]
        for t in np.linspace(lo, hi, 6)[1:-1]:
            numeric = central_difference(
                lambda u: model_f(model_id, u).f, float(t)
            )
            assert np.allclose(model_f(model_id, float(t)).fp, numeric, atol=1e-6)

    def test_second_derivatives(self, model_id):
        lo, hi = MODEL_RANGE[model_id]
        for t in np.linspace(lo, hi, 6)[1:-1]:
            numeric = central_difference(
                lambda u: model_f(model_id, u).fp, float(t)
            )
            _, fpp = model_jet2(model_id, float(t))
            assert np.allclose(fpp, numeric, atol=1e-6)

    def test_rescaled_sphere_derivatives(self):
        for t in (0.2, 0.5, 0.9):
            numeric = central_difference(lambda u: sphere6_rescaled_f(u).f, t)
            assert np.allclose(sphere6_rescaled_f(t).fp, numeric, atol=1e-6)


class TestModelSolutions:
    """The models solve the f-system with their mu."""

    def test_interior_samples(self, model_id):
        lo, hi = MODEL_RANGE[model_id]
        for t in np.linspace(lo, hi, 102)[1:-1]:
            jet, fpp = model_jet2(model_id, float(t))
            assert np.max(np.abs(f_system_residual(jet, fpp))) < 1e-9

    def test_rescaled_sphere(self):
        for t in np.linspace(0.05, 1.0, 8):
            jet, fpp = sphere6_rescaled_jet2(float(t))
            assert jet.mu == 2.0
            assert np.max(np.abs(f_system_residual(jet, fpp))) < 1e-9

    def test_rescaled_sphere_range(self):
        with pytest.raises(DomainError):
            sphere6_rescaled_f(math.pi / (2 * math.sqrt(2)))

    def test_interpolant_is_closed_form(self):
        curve = model_curve(ModelId.S3XS3, np.linspace(0.1, 0.5, 3))
        f, fp = curve.value(0.25)
        jet = model_f(ModelId.S3XS3, 0.25)
        assert np.allclose(f, jet.f)
        assert np.allclose(fp, jet.fp)


class TestHData:
    """Tests for h-system data of the models."""

    def test_s3xs3_base_point(self, x_o):
        x = model_h_point(ModelId.S3XS3)
        assert x.mu == 2.0
        assert x.a[0] == 0.0
        assert np.allclose(x.point7, x_o)

    def test_custom_base_point(self):
        x = model_h_point(ModelId.TWISTOR_CP3, 0.3)
        jet = model_f(ModelId.TWISTOR_CP3, 0.3)
        assert x.b[0] == pytest.approx(jet.f[0] ** 2 / 2)

    @pytest.mark.parametrize(
        "model,expected",
        [
            (ModelId.S3XS3, [1 / 9, -1 / 9, -1 / 9, 1 / 9]),
            (ModelId.SPHERE6, [1 / 4, -3 / 8, -1 / 4, 3 / 8]),
        ],
    )
    def test_singular_initial_slopes(self, model, expected):
        states = singular_model_curve(model, np.array([0.0]))
        assert np.allclose(states[0, :4], 0.0)
        assert np.allclose(states[0, 4:8], expected)
        assert SINGULAR_C1[model] == pytest.approx(expected[0])

    def test_singular_curves_have_zero_integrals(self):
        s = np.linspace(0.0, 0.5, 11)
        for model in (ModelId.S3XS3, ModelId.SPHERE6):
            table = singular_model_curve(model, s)
            assert np.max(np.abs(table[:, 8:])) < 1e-14

    def test_singular_curves_are_odd(self):
        s = np.linspace(0.05, 0.5, 5)
        for func in (s3xs3_singular_h, sphere6_singular_h):
            assert np.allclose(func(-s)[:, :4], -func(s)[:, :4])
            assert np.allclose(func(-s)[:, 4:], func(s)[:, 4:])

    def test_twistor_has_no_singular_orbit(self):
        with pytest.raises(DomainError):
            singular_model_curve(ModelId.TWISTOR_CP3, np.array([0.0]))
