"""Unit tests for the exterior algebra on R^6.

Tests cover:
- Multi-index tables and wedge/interior products
- Tensor conversion, evaluation and pullback
- Hitchin's invariant and the orbit classification
- The complex structure J_theta and the complex volume form
"""

import numpy as np
import pytest

from nearly_kahler.algebra.forms6 import (
    KForm,
    OrbitType,
    basis_form,
    complex_structure,
    complex_volume_form,
    evaluate,
    from_tensor,
    hitchin_endomorphism,
    interior,
    multi_indices,
    permutation_sign,
    pullback,
    stability_invariant,
    to_tensor,
    volume_form,
    wedge,
    zero_form,
)
from nearly_kahler.errors import (
    DegreeError,
    NotStableError,
    VolumeFormError,
)


def random_form(rng, degree: int) -> KForm:
    return KForm(degree, rng.standard_normal(len(multi_indices(degree))))


def random_stable_forms(rng, standard_form: KForm, count: int) -> list[KForm]:
    """Pullbacks of the standard form by well-conditioned random matrices."""
    forms = []
    while len(forms) < count:
        m = np.eye(6) + 0.3 * rng.standard_normal((6, 6))
        if np.linalg.cond(m) < 20:
            forms.append(pullback(standard_form, m))
    return forms


class TestMultiIndices:
    """Tests for the coefficient layout."""

    @pytest.mark.parametrize("degree,count", [(0, 1), (1, 6), (2, 15), (3, 20), (6, 1)])
    def test_counts(self, degree, count):
        assert len(multi_indices(degree)) == count

    def test_lexicographic(self):
        indices = multi_indices(3)
        assert indices[0] == (0, 1, 2)
        assert indices[-1] == (3, 4, 5)
        assert list(indices) == sorted(indices)

    def test_bad_degree(self):
        with pytest.raises(DegreeError):
            multi_indices(7)

    def test_permutation_sign(self):
        assert permutation_sign((0, 1, 2)) == 1
        assert permutation_sign((1, 0, 2)) == -1
        assert permutation_sign((2, 0, 1)) == 1
        assert permutation_sign((1, 1, 2)) == 0

    def test_wrong_coefficient_count(self):
        with pytest.raises(DegreeError):
            KForm(2, np.zeros(14))


class TestWedge:
    """Tests for the exterior product."""

    def test_basis_product(self):
        result = wedge(basis_form((0, 1)), basis_form((2,)))
        assert result.allclose(basis_form((0, 1, 2)))

    def test_reordered_basis_form(self):
        assert basis_form((1, 0)).allclose(-basis_form((0, 1)))

    def test_graded_commutativity(self, rng):
        a, b = random_form(rng, 2), random_form(rng, 3)
        assert wedge(a, b).allclose(wedge(b, a), atol=1e-12)
        c = random_form(rng, 1)
        assert wedge(c, b).allclose(-wedge(b, c), atol=1e-12)

    def test_one_form_squares_to_zero(self, rng):
        a = random_form(rng, 1)
        assert wedge(a, a).norm() < 1e-14

    def test_associativity(self, rng):
        a, b, c = (random_form(rng, k) for k in (1, 2, 2))
        left = wedge(wedge(a, b), c)
        right = wedge(a, wedge(b, c))
        assert left.allclose(right, atol=1e-12)

    def test_degree_overflow(self, rng):
        with pytest.raises(DegreeError):
            wedge(random_form(rng, 4), random_form(rng, 3))


class TestInterior:
    """Tests for the interior product."""

    def test_basis(self):
        e = np.eye(6)
        assert interior(e[0], basis_form((0, 1, 2))).allclose(
            basis_form((1, 2))
        )
        assert interior(e[1], basis_form((0, 1, 2))).allclose(
            -basis_form((0, 2))
        )

    def test_antiderivation(self, rng):
        v = rng.standard_normal(6)
        a, b = random_form(rng, 2), random_form(rng, 1)
        left = interior(v, wedge(a, b))
        right = wedge(interior(v, a), b) + wedge(a, interior(v, b))
        assert left.allclose(right, atol=1e-12)

    def test_zero_form_rejected(self):
        with pytest.raises(DegreeError):
            interior(np.ones(6), zero_form(0))


class TestTensors:
    """Tests for tensor conversion, evaluation and pullback."""

    def test_round_trip(self, rng):
        a = random_form(rng, 3)
        assert from_tensor(to_tensor(a), 3).allclose(a)

    def test_antisymmetric(self, rng):
        tensor = to_tensor(random_form(rng, 3))
        assert np.allclose(tensor, -np.transpose(tensor, (1, 0, 2)))
        assert np.allclose(tensor, np.transpose(tensor, (1, 2, 0)))

    def test_evaluate_basis(self):
        e = np.eye(6)
        assert evaluate(basis_form((0, 2, 4)), [e[0], e[2], e[4]]) == 1.0
        assert evaluate(basis_form((0, 2, 4)), [e[2], e[0], e[4]]) == -1.0

    def test_evaluate_wrong_count(self):
        with pytest.raises(DegreeError):
            evaluate(basis_form((0, 1)), [np.ones(6)])

    def test_pullback_matches_evaluation(self, rng):
        a = random_form(rng, 3)
        m = rng.standard_normal((6, 6))
        vs = rng.standard_normal((3, 6))
        assert evaluate(pullback(a, m), vs) == pytest.approx(
            evaluate(a, [m @ v for v in vs])
        )

    def test_pullback_by_determinant_on_top_degree(self, rng):
        m = rng.standard_normal((6, 6))
        pulled = pullback(volume_form(), m)
        assert pulled.coeffs[0] == pytest.approx(np.linalg.det(m))


class TestStabilityInvariant:
    """Tests for P(theta) and the orbit types."""

    def test_standard_form(self, standard_form, vol):
        result = stability_invariant(standard_form, vol)
        assert result.tag is OrbitType.NEGATIVE
        assert result.is_stable
        assert result.value == pytest.approx(-4.0)

    def test_s_theta_squares_to_p(self, standard_form, vol):
        s = hitchin_endomorphism(standard_form, vol)
        assert np.allclose(s.squared(), -4.0 * np.eye(6))

    def test_split_form_positive(self, split_form, vol):
        result = stability_invariant(split_form, vol)
        assert result.tag is OrbitType.POSITIVE
        assert result.value == pytest.approx(1.0)

    def test_decomposable_form_null(self, vol):
        result = stability_invariant(basis_form((0, 1, 2)), vol)
        assert result.tag is OrbitType.NULL
        assert result.value == 0.0

    def test_quartic_scaling(self, standard_form, vol):
        scaled = stability_invariant(2.0 * standard_form, vol)
        assert scaled.value == pytest.approx(16 * -4.0)

    def test_volume_scaling(self, standard_form):
        result = stability_invariant(standard_form, volume_form(2.0))
        assert result.value == pytest.approx(-1.0)

    def test_random_forms_consistent(self, rng, vol):
        worst = 0.0
        for _ in range(1000):
            result = stability_invariant(random_form(rng, 3), vol)
            worst = max(worst, result.residual / max(1.0, abs(result.value)))
        assert worst < 1e-10

    def test_zero_volume(self, standard_form):
        with pytest.raises(VolumeFormError):
            stability_invariant(standard_form, volume_form(0.0))

    def test_wrong_degree(self, vol):
        with pytest.raises(DegreeError):
            stability_invariant(basis_form((0, 1)), vol)


class TestComplexStructure:
    """Tests for J_theta."""

    def test_squares_to_minus_identity(self, standard_form, vol):
        j = complex_structure(standard_form, vol)
        assert np.allclose(j.squared(), -np.eye(6))

    def test_standard_orientation(self, standard_form, vol):
        j = complex_structure(standard_form, vol)
        assert np.allclose(j(np.eye(6)[0]), np.eye(6)[1])

    def test_invariant_under_scaling(self, standard_form, vol):
        j = complex_structure(standard_form, vol)
        for c in (3.0, -0.5):
            assert np.allclose(
                complex_structure(c * standard_form, vol).matrix, j.matrix
            )

    def test_orientation_reversal(self, standard_form):
        j_plus = complex_structure(standard_form, volume_form(1.0))
        j_minus = complex_structure(standard_form, volume_form(-1.0))
        assert np.allclose(j_minus.matrix, -j_plus.matrix)

    def test_pullback_identity(self, rng, standard_form, vol):
        j = complex_structure(standard_form, vol).matrix
        vs = rng.standard_normal((3, 6))
        left = evaluate(standard_form, [j @ v for v in vs])
        right = evaluate(standard_form, [j @ vs[0], vs[1], vs[2]])
        assert left == pytest.approx(-right)

    def test_random_stable_forms(self, rng, standard_form, vol):
        for theta in random_stable_forms(rng, standard_form, 100):
            j = complex_structure(theta, vol).matrix
            assert np.max(np.abs(j @ j + np.eye(6))) < 1e-8

            vs = rng.standard_normal((3, 6))
            left = evaluate(theta, [j @ v for v in vs])
            right = evaluate(theta, [j @ vs[0], vs[1], vs[2]])
            assert abs(left + right) < 1e-8 * (1 + abs(right))

            re, im = complex_volume_form(theta, vol)
            v = rng.standard_normal(6)
            scale = theta.norm() * (1 + np.max(np.abs(j)))
            real = interior(v, re) - interior(j @ v, im)
            imag = interior(v, im) + interior(j @ v, re)
            assert real.norm() / scale < 1e-9
            assert imag.norm() / scale < 1e-9

    def test_not_stable(self, split_form, vol):
        with pytest.raises(NotStableError) as exc:
            complex_structure(split_form, vol)
        assert exc.value.failed == ["P<0"]

    def test_type_three_zero(self, rng, standard_form, vol):
        j = complex_structure(standard_form, vol).matrix
        re, im = complex_volume_form(standard_form, vol)
        v = rng.standard_normal(6)
        # alpha(v + iJv, ...) = 0 splits into two real equations
        real = interior(v, re) - interior(j @ v, im)
        imag = interior(v, im) + interior(j @ v, re)
        assert real.norm() < 1e-12
        assert imag.norm() < 1e-12

    def test_volume_from_complex_form(self, standard_form, vol):
        re, im = complex_volume_form(standard_form, vol)
        top = wedge(re, im)
        assert top.coeffs[0] != 0.0
