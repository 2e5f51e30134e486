"""Exterior algebra on an oriented 6-dimensional real vector space.
Uses numpy index tables for wedge and interior products, plus Hitchin's
quartic invariant of 3-forms and the complex structure it induces.

Forms are stored as coefficient vectors over strictly increasing
multi-indices in lexicographic order; basis indices are 0-based, so the
form written e^{135} in the literature is ``basis_form((0, 2, 4))``.
"""

import logging
import math
import string
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

from nearly_kahler.config import settings
from nearly_kahler.errors import (
    ConsistencyError,
    DegreeError,
    NotStableError,
    VolumeFormError,
)

logger = logging.getLogger(__name__)

DIM = 6


@lru_cache
def multi_indices(degree: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing multi-indices of the given degree."""
    if not 0 <= degree <= DIM:
        raise DegreeError(f"Degree must lie in 0..{DIM}, got {degree}")
    return tuple(combinations(range(DIM), degree))


@lru_cache
def _positions(degree: int) -> dict[tuple[int, ...], int]:
    return {idx: i for i, idx in enumerate(multi_indices(degree))}


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(
        1
        for i in range(len(seq))
        for j in range(i + 1, len(seq))
        if seq[i] > seq[j]
    )
    return -1 if inversions % 2 else 1


@lru_cache
def _wedge_table(
    ka: int, kb: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ia_list, ib_list, out_list, sign_list = [], [], [], []
    out_pos = _positions(ka + kb)
    for ia, a in enumerate(multi_indices(ka)):
        for ib, b in enumerate(multi_indices(kb)):
            sign = permutation_sign(a + b)
            if sign == 0:
                continue
            ia_list.append(ia)
            ib_list.append(ib)
            out_list.append(out_pos[tuple(sorted(a + b))])
            sign_list.append(sign)
    return (
        np.array(ia_list, dtype=int),
        np.array(ib_list, dtype=int),
        np.array(out_list, dtype=int),
        np.array(sign_list, dtype=float),
    )


@lru_cache
def _interior_table(
    degree: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    in_list, vec_list, out_list, sign_list = [], [], [], []
    out_pos = _positions(degree - 1)
    for i_in, idx in enumerate(multi_indices(degree)):
        for slot, m in enumerate(idx):
            in_list.append(i_in)
            vec_list.append(m)
            out_list.append(out_pos[idx[:slot] + idx[slot + 1:]])
            sign_list.append(-1.0 if slot % 2 else 1.0)
    return (
        np.array(in_list, dtype=int),
        np.array(vec_list, dtype=int),
        np.array(out_list, dtype=int),
        np.array(sign_list, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class KForm:
    """A k-form on the fixed 6-dimensional space."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        size = len(multi_indices(self.degree))
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if coeffs.shape != (size,):
            raise DegreeError(
                f"A {self.degree}-form needs {size} coefficients, "
                f"got {coeffs.size}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: "KForm") -> "KForm":
        self._check_same_degree(other)
        return KForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "KForm") -> "KForm":
        self._check_same_degree(other)
        return KForm(self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, -self.coeffs)

    def __mul__(self, scalar: float) -> "KForm":
        return KForm(self.degree, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "KForm":
        return KForm(self.degree, self.coeffs / float(scalar))

    def _check_same_degree(self, other: "KForm") -> None:
        if other.degree != self.degree:
            raise DegreeError(
                f"Cannot combine a {self.degree}-form with a "
                f"{other.degree}-form"
            )

    def norm(self) -> float:
        """Max-abs norm of the coefficient vector."""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def coefficient(self, indices: Sequence[int]) -> float:
        """Coefficient of e^{indices}, with the sign of the reordering."""
        sign = permutation_sign(tuple(indices))
        if sign == 0:
            return 0.0
        key = tuple(sorted(indices))
        return sign * float(self.coeffs[_positions(len(key))[key]])

    def allclose(self, other: "KForm", atol: float = 1e-12) -> bool:
        return self.degree == other.degree and bool(
            np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol)
        )


def zero_form(degree: int) -> KForm:
    return KForm(degree, np.zeros(len(multi_indices(degree))))


def basis_form(indices: Sequence[int], coeff: float = 1.0) -> KForm:
    """The monomial coeff * e^{i1} ^ ... ^ e^{ik} in any index order."""
    indices = tuple(indices)
    form = zero_form(len(indices))
    sign = permutation_sign(indices)
    if sign == 0:
        return form
    values = np.zeros_like(form.coeffs)
    values[_positions(len(indices))[tuple(sorted(indices))]] = sign * coeff
    return KForm(len(indices), values)


def volume_form(scale: float = 1.0) -> KForm:
    return KForm(DIM, [scale])


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product a ^ b.

    Raises:
        DegreeError: If a.degree + b.degree exceeds 6.
    """
    degree = a.degree + b.degree
    if degree > DIM:
        raise DegreeError(
            f"Wedge of degrees {a.degree} and {b.degree} exceeds {DIM}"
        )
    ia, ib, out, sign = _wedge_table(a.degree, b.degree)
    coeffs = np.zeros(len(multi_indices(degree)))
    np.add.at(coeffs, out, sign * a.coeffs[ia] * b.coeffs[ib])
    return KForm(degree, coeffs)


def interior(v: Sequence[float], a: KForm) -> KForm:
    """Interior product of the vector v into a."""
    if a.degree < 1:
        raise DegreeError("Interior product needs a form of degree >= 1")
    v = np.asarray(v, dtype=float)
    i_in, vec, out, sign = _interior_table(a.degree)
    coeffs = np.zeros(len(multi_indices(a.degree - 1)))
    np.add.at(coeffs, out, sign * v[vec] * a.coeffs[i_in])
    return KForm(a.degree - 1, coeffs)


def to_tensor(a: KForm) -> np.ndarray:
    """Fully antisymmetric tensor with T[i1..ik] = a(e_i1, ..., e_ik)."""
    tensor = np.zeros((DIM,) * a.degree)
    if a.degree == 0:
        return np.array(a.coeffs[0])
    for idx, value in zip(multi_indices(a.degree), a.coeffs, strict=True):
        if value == 0.0:
            continue
        for perm in _permutations_with_sign(idx):
            tensor[perm[0]] = perm[1] * value
    return tensor


@lru_cache
def _perm_cache(k: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    return tuple(
        (p, permutation_sign(p)) for p in permutations(range(k))
    )


def _permutations_with_sign(idx: tuple[int, ...]):
    for p, sign in _perm_cache(len(idx)):
        yield tuple(idx[i] for i in p), sign


def from_tensor(tensor: np.ndarray, degree: int) -> KForm:
    """Read a k-form off an antisymmetric tensor (no symmetrization)."""
    if degree == 0:
        return KForm(0, [float(tensor)])
    return KForm(
        degree, [tensor[idx] for idx in multi_indices(degree)]
    )


def evaluate(a: KForm, vectors: Sequence[Sequence[float]]) -> float:
    """a(v1, ..., vk)."""
    if len(vectors) != a.degree:
        raise DegreeError(
            f"A {a.degree}-form takes {a.degree} vectors, got {len(vectors)}"
        )
    result = to_tensor(a)
    for v in vectors:
        result = np.tensordot(np.asarray(v, dtype=float), result, axes=(0, 0))
    return float(result)


def pullback(a: KForm, matrix: np.ndarray) -> KForm:
    """M*a, i.e. (M*a)(v1, ..., vk) = a(M v1, ..., M vk)."""
    if a.degree == 0:
        return a
    letters = string.ascii_lowercase
    src = letters[: a.degree]
    dst = letters[a.degree: 2 * a.degree]
    spec = src + "," + ",".join(s + d for s, d in zip(src, dst)) + "->" + dst
    matrix = np.asarray(matrix, dtype=float)
    tensor = np.einsum(spec, to_tensor(a), *([matrix] * a.degree))
    return from_tensor(tensor, a.degree)


@dataclass(frozen=True, eq=False)
class Endo6:
    """Endomorphism of the 6-dimensional space (columns = images)."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (DIM, DIM):
            raise DegreeError(f"Endo6 needs a 6x6 matrix, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def __call__(self, v: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def __matmul__(self, other: "Endo6") -> "Endo6":
        return Endo6(self.matrix @ other.matrix)

    def squared(self) -> np.ndarray:
        return self.matrix @ self.matrix


class OrbitType(str, Enum):
    """GL+ orbit types of 3-forms, classified by the sign of P."""

    NEGATIVE = "NegativeOrbit"
    NULL = "NullCone"
    POSITIVE = "PositiveOrbit"


@dataclass(frozen=True)
class StabilityClass:
    tag: OrbitType
    value: float
    residual: float = 0.0

    @property
    def is_stable(self) -> bool:
        return self.tag is OrbitType.NEGATIVE


def _check_volume(vol: KForm) -> float:
    if vol.degree != DIM:
        raise DegreeError(f"Volume form must have degree 6, got {vol.degree}")
    scale = float(vol.coeffs[0])
    if scale == 0.0:
        raise VolumeFormError("Volume form is zero")
    return scale


def _check_three_form(theta: KForm) -> None:
    if theta.degree != 3:
        raise DegreeError(f"Expected a 3-form, got degree {theta.degree}")


def hitchin_endomorphism(theta: KForm, vol: KForm) -> Endo6:
    """S_theta defined by A(i_v theta ^ theta) = S_theta(v) (x) vol.

    A identifies a 5-form beta with the vector w such that
    beta ^ alpha = alpha(w) vol for every 1-form alpha.

    Args:
        theta: A 3-form
        vol: Nonzero 6-form fixing the orientation and scale

    Returns:
        S_theta as an Endo6

    """
    _check_three_form(theta)
    scale = _check_volume(vol)
    identity = np.eye(DIM)
    columns = []
    for i in range(DIM):
        beta = wedge(interior(identity[i], theta), theta)
        # beta ^ e^j picks the single 5-index missing j
        columns.append(
            [
                wedge(beta, KForm(1, identity[j])).coeffs[0] / scale
                for j in range(DIM)
            ]
        )
    return Endo6(np.array(columns).T)


def _classify(s_theta: Endo6, theta: KForm, vol: KForm) -> StabilityClass:
    square = s_theta.squared()
    p_value = float(np.mean(np.diag(square)))
    residual = float(np.max(np.abs(square - p_value * np.eye(DIM))))
    scale = theta.norm() ** 4 / float(vol.coeffs[0]) ** 2
    if residual > 1e-8 * (1.0 + scale):
        raise ConsistencyError(
            f"S_theta^2 is not a multiple of Id (residual {residual:.3e})"
        )
    eps = settings.class_tol * scale
    if abs(p_value) <= eps:
        tag = OrbitType.NULL
    elif p_value < 0:
        tag = OrbitType.NEGATIVE
    else:
        tag = OrbitType.POSITIVE
    return StabilityClass(tag=tag, value=p_value, residual=residual)


def stability_invariant(theta: KForm, vol: KForm) -> StabilityClass:
    """Hitchin's quartic invariant P(theta) and the orbit type.

    P is the mean of the diagonal of S_theta^2; the largest deviation
    of S_theta^2 from P*Id is kept as ``residual``.

    Raises:
        ConsistencyError: If S_theta^2 is not proportional to Id.
    """
    return _classify(hitchin_endomorphism(theta, vol), theta, vol)


def complex_structure(theta: KForm, vol: KForm) -> Endo6:
    """J_theta = S_theta / sqrt(-P(theta)) on the negative orbit.

    J is even in theta: J_{c theta} = J_theta for c != 0.

    Raises:
        NotStableError: If P(theta) is not negative.
    """
    s_theta = hitchin_endomorphism(theta, vol)
    stability = _classify(s_theta, theta, vol)
    if not stability.is_stable:
        raise NotStableError(
            f"3-form is not stable: P = {stability.value:.6e} "
            f"({stability.tag.value})",
            failed=["P<0"],
        )
    logger.debug("J_theta built with P = %.6e", stability.value)
    return Endo6(s_theta.matrix / math.sqrt(-stability.value))


def complex_volume_form(theta: KForm, vol: KForm) -> tuple[KForm, KForm]:
    """Real and imaginary parts of alpha = (theta + i J*theta) / 2.

    alpha has type (3,0): i_{v + iJv} alpha = 0 for every v.
    """
    j_theta = complex_structure(theta, vol)
    return 0.5 * theta, 0.5 * pullback(theta, j_theta.matrix)
