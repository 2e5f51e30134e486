"""Isometry transformations of solutions and canonical representatives.

On R^7 = (a2, a3, a4, b1, b2, b3, b4) the group is generated by

    tau1: (a2, ..., b4) -> (-a2, a3, a4, b1, -b2, b3, b4)
    tau2: negates a2, a3, b1, b2, b3

tau1 preserves the h-system and N (it is h2 -> -h2); tau2 maps
solutions with constant mu to solutions with -mu.

On quadruple curves x = (f1, f2, f3, frak) of the f-system:

    tau1: x(t) -> (-x1(-t), x2(-t), x3(-t), x4(-t))
    tau2: x -> (-x1, -x2, -x3, x4)
    tau3: x -> (x1, -x3, -x2, x4)
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from nearly_kahler.errors import DomainError
from nearly_kahler.ode.curves import FCurve, SolutionCurve

_TAU1_SIGNS = np.array([-1.0, 1, 1, 1, -1, 1, 1])
_TAU2_SIGNS = np.array([-1.0, -1, 1, -1, -1, -1, 1])


@dataclass(frozen=True)
class TransformTag:
    """The element tau1^tau1 tau2^tau2 tau3^tau3 of the abelian group T."""

    tau1: bool = False
    tau2: bool = False
    tau3: bool = False

    def __matmul__(self, other: "TransformTag") -> "TransformTag":
        return TransformTag(
            self.tau1 ^ other.tau1,
            self.tau2 ^ other.tau2,
            self.tau3 ^ other.tau3,
        )

    @property
    def is_identity(self) -> bool:
        return not (self.tau1 or self.tau2 or self.tau3)

    @property
    def label(self) -> str:
        names = [
            name
            for name, on in (
                ("tau1", self.tau1),
                ("tau2", self.tau2),
                ("tau3", self.tau3),
            )
            if on
        ]
        return "*".join(names) or "id"


IDENTITY = TransformTag()
TAU1 = TransformTag(tau1=True)
TAU2 = TransformTag(tau2=True)
TAU3 = TransformTag(tau3=True)


def point_group() -> tuple[TransformTag, ...]:
    """The four elements of T acting on R^7."""
    return tuple(TransformTag(a, b) for a, b in product((False, True), repeat=2))


def curve_group() -> tuple[TransformTag, ...]:
    """The eight elements of T acting on quadruple curves."""
    return tuple(
        TransformTag(a, b, c) for a, b, c in product((False, True), repeat=3)
    )


def point_signs(tag: TransformTag) -> np.ndarray:
    if tag.tau3:
        raise DomainError("tau3 acts on quadruple curves only")
    signs = np.ones(7)
    if tag.tau1:
        signs = signs * _TAU1_SIGNS
    if tag.tau2:
        signs = signs * _TAU2_SIGNS
    return signs


def apply_to_point(tag: TransformTag, x: np.ndarray) -> np.ndarray:
    """Act on a point of R^7 or on an (n, 7) array of points."""
    return np.asarray(x, dtype=float) * point_signs(tag)


def apply_to_states(tag: TransformTag, states: np.ndarray) -> np.ndarray:
    """Act on (..., 8) state arrays; a1 follows b1."""
    states = np.asarray(states, dtype=float)
    signs = point_signs(tag)
    full = np.concatenate([[signs[3]], signs])
    return states * full


def apply_to_fcurve(tag: TransformTag, curve: FCurve) -> FCurve:
    """Act on a sampled f-curve; frak is carried by (f4, f5)."""
    t, f, fp = curve.t, curve.f.copy(), curve.fp.copy()
    if tag.tau3:
        f[:, [1, 2]] = -f[:, [2, 1]]
        fp[:, [1, 2]] = -fp[:, [2, 1]]
    if tag.tau2:
        f[:, :3] *= -1
        fp[:, :3] *= -1
    if tag.tau1:
        t = -t[::-1]
        f, fp = f[::-1], fp[::-1]
        f[:, 0] *= -1
        fp[:, 1:] *= -1
    return FCurve(t=t, f=f, fp=fp, mu=curve.mu, meta=dict(curve.meta))


def apply_transform(tag: TransformTag, x):
    """Dispatch on the argument: R^7 point(s), state arrays or f-curves."""
    if isinstance(x, FCurve):
        return apply_to_fcurve(tag, x)
    array = np.asarray(x, dtype=float)
    if array.shape[-1] == 8:
        return apply_to_states(tag, array)
    if array.shape[-1] == 7:
        return apply_to_point(tag, array)
    raise DomainError(f"cannot act on an array of shape {array.shape}")


def _lex_less(x: np.ndarray, y: np.ndarray, tol: float) -> bool:
    for u, v in zip(x, y, strict=True):
        if abs(u - v) > tol:
            return bool(u < v)
    return False


def canonical_representative(
    x: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Lexicographically smallest element of the T-orbit of x in R^7.

    Coordinates within ``tol`` of each other compare equal.
    """
    x = np.asarray(x, dtype=float)
    best = x
    for tag in point_group()[1:]:
        candidate = apply_to_point(tag, x)
        if _lex_less(candidate, best, tol):
            best = candidate
    return best


def curve_distance(
    first: SolutionCurve, second: SolutionCurve
) -> tuple[float, TransformTag]:
    """Sup distance between two h-curves up to T.

    The second curve is evaluated on the first curve's grid, through its
    dense output when the grids differ.

    Returns:
        (distance, tag) with the minimizing group element
    """
    if len(first) == len(second) and np.allclose(
        first.grid, second.grid, rtol=0, atol=1e-14
    ):
        other = second.states
    else:
        other = np.array([second(s) for s in first.grid])
    best = (np.inf, IDENTITY)
    for tag in point_group():
        distance = float(
            np.max(np.abs(first.states - apply_to_states(tag, other)))
        )
        if distance < best[0]:
            best = (distance, tag)
    return best
