"""Closed-form homogeneous nearly Kahler solutions.

Each model is given by its coefficient functions f_1..f_5 on the regular
range together with hand-differentiated first and second derivatives.
The twistor space is returned as the sign-flipped family (-f_i), which
solves the system with mu = 2.
"""

import math
from collections.abc import Callable
from enum import Enum

import numpy as np

from nearly_kahler.algebra.invariant_frame import FJet
from nearly_kahler.errors import DomainError
from nearly_kahler.ode.curves import FCurve, HState
from nearly_kahler.ode.nk_ode import first_integrals_array, h_vector_from_f

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


class ModelId(str, Enum):
    SPHERE6 = "Sphere6"
    TWISTOR_CP3 = "TwistorCP3"
    S3XS3 = "S3xS3"


MODEL_MU = {
    ModelId.SPHERE6: 1.0,
    ModelId.TWISTOR_CP3: 2.0,
    ModelId.S3XS3: 2.0,
}

MODEL_RANGE = {
    ModelId.SPHERE6: (0.0, math.pi / 2),
    ModelId.TWISTOR_CP3: (0.0, math.pi / 2),
    ModelId.S3XS3: (0.0, math.pi / (2 * SQRT6)),
}

S3XS3_BASE_POINT = math.pi / (4 * SQRT6)

BASE_POINT = {
    ModelId.SPHERE6: math.pi / 4,
    ModelId.TWISTOR_CP3: math.pi / 4,
    ModelId.S3XS3: S3XS3_BASE_POINT,
}

RESCALED_SPHERE6_RANGE = (0.0, math.pi / (2 * SQRT2))

Jet2 = tuple[np.ndarray, np.ndarray, np.ndarray]


def _sphere6(t: float) -> Jet2:
    s, c = math.sin(t), math.cos(t)
    f = np.array(
        [
            -s,
            (4 - 9 * s**2) * c / 8,
            -(s**2) * c / 8,
            0.0,
            3 * s**2 * c / 8,
        ]
    )
    fp = np.array(
        [
            -c,
            (-4 * s - 18 * s * c**2 + 9 * s**3) / 8,
            -(2 * s * c**2 - s**3) / 8,
            0.0,
            3 * (2 * s * c**2 - s**3) / 8,
        ]
    )
    fpp = np.array(
        [
            s,
            (-4 * c - 18 * c**3 + 63 * s**2 * c) / 8,
            -(2 * c**3 - 7 * s**2 * c) / 8,
            0.0,
            3 * (2 * c**3 - 7 * s**2 * c) / 8,
        ]
    )
    return f, fp, fpp


def _twistor(t: float) -> Jet2:
    # Written in w = 2t
    sw, cw = math.sin(2 * t), math.cos(2 * t)
    c2w = cw**2 - sw**2
    f = np.array(
        [
            -sw / 2,
            -(1 - 2 * cw - 3 * cw**2) / 64,
            -(1 + 2 * cw - 3 * cw**2) / 64,
            0.0,
            3 * sw**2 / 64,
        ]
    )
    fp = np.array(
        [
            -cw,
            -sw * (1 + 3 * cw) / 16,
            sw * (1 - 3 * cw) / 16,
            0.0,
            3 * sw * cw / 16,
        ]
    )
    fpp = np.array(
        [
            2 * sw,
            -(cw + 3 * c2w) / 8,
            (cw - 3 * c2w) / 8,
            0.0,
            3 * c2w / 8,
        ]
    )
    return f, fp, fpp


def _s3xs3(t: float) -> Jet2:
    x = SQRT6 * t
    s1, c1 = math.sin(x), math.cos(x)
    s2, c2 = math.sin(2 * x), math.cos(2 * x)
    f = np.array([-SQRT2 / 3, SQRT3 / 36 * s2, 0.0, 0.0, -SQRT3 / 36 * s1])
    fp = np.array([0.0, SQRT2 / 6 * c2, 0.0, 0.0, -SQRT2 / 12 * c1])
    fpp = np.array([0.0, -2 * SQRT3 / 3 * s2, 0.0, 0.0, SQRT3 / 6 * s1])
    return f, fp, fpp


_CLOSED_FORMS: dict[ModelId, Callable[[float], Jet2]] = {
    ModelId.SPHERE6: _sphere6,
    ModelId.TWISTOR_CP3: _twistor,
    ModelId.S3XS3: _s3xs3,
}


def _check_range(name: str, t: float, bounds: tuple[float, float]) -> None:
    lo, hi = bounds
    if not lo < t < hi:
        raise DomainError(f"t={t} outside the regular range ({lo}, {hi}) of {name}")


def model_jet2(m: ModelId, t: float) -> tuple[FJet, np.ndarray]:
    """Jet of model m at t together with the second derivatives."""
    m = ModelId(m)
    _check_range(m.value, t, MODEL_RANGE[m])
    f, fp, fpp = _CLOSED_FORMS[m](t)
    return FJet(t=t, f=f, fp=fp, mu=MODEL_MU[m]), fpp


def model_f(m: ModelId, t: float) -> FJet:
    """Closed-form jet of model m at t.

    Raises:
        DomainError: If t lies outside the model's regular range.
    """
    return model_jet2(m, t)[0]


def _rescaled_sphere6(t: float) -> Jet2:
    # f~_i(t) = -f_i(tau)/2 for i >= 2 with tau = pi/2 - sqrt(2) t
    f, fp, fpp = _sphere6(math.pi / 2 - SQRT2 * t)
    u = SQRT2 * t
    f_new = -f / 2
    fp_new = SQRT2 / 2 * fp
    fpp_new = -fpp
    f_new[0] = -math.cos(u) / SQRT2
    fp_new[0] = math.sin(u)
    fpp_new[0] = SQRT2 * math.cos(u)
    return f_new, fp_new, fpp_new


def sphere6_rescaled_jet2(t: float) -> tuple[FJet, np.ndarray]:
    _check_range("rescaled Sphere6", t, RESCALED_SPHERE6_RANGE)
    f, fp, fpp = _rescaled_sphere6(t)
    return FJet(t=t, f=f, fp=fp, mu=2.0), fpp


def sphere6_rescaled_f(t: float) -> FJet:
    """The unit-speed mu = 2 sphere family meeting the singular orbit at 0.

    Raises:
        DomainError: If t lies outside (0, pi/(2 sqrt 2)).
    """
    return sphere6_rescaled_jet2(t)[0]


def model_h_point(m: ModelId, t_o: float | None = None) -> HState:
    """h-system data (a, b) of model m at base point t_o with h1(t_o) = 0.

    Args:
        m: Model
        t_o: Base point, defaults to the model's designated one

    Raises:
        DomainError: If t_o lies outside the regular range.
    """
    m = ModelId(m)
    t_o = BASE_POINT[m] if t_o is None else t_o
    j = model_f(m, t_o)
    return HState.from_vector(
        0.0, h_vector_from_f(j.f, j.fp, 0.0), MODEL_MU[m]
    )


def model_curve(m: ModelId, t: np.ndarray) -> FCurve:
    """Model m sampled on an increasing grid with a closed-form interpolant."""
    m = ModelId(m)
    for u in t:
        _check_range(m.value, float(u), MODEL_RANGE[m])
    jets = [_CLOSED_FORMS[m](float(u)) for u in t]

    def interpolant(u: float) -> tuple[np.ndarray, np.ndarray]:
        f, fp, _ = _CLOSED_FORMS[m](float(u))
        return f, fp

    return FCurve(
        t=t,
        f=[jet[0] for jet in jets],
        fp=[jet[1] for jet in jets],
        mu=MODEL_MU[m],
        interpolant=interpolant,
        meta={"model": m.value},
    )


# =============================================================================
# Singular-orbit h-curves
# =============================================================================


def s3xs3_singular_h(s: np.ndarray) -> np.ndarray:
    """(a, b) of the S3xS3 solution started at the singular orbit.

    h1 = s/9, h2 = h3 = -(sqrt 3/36) sin(4 s/sqrt 3) and
    h4 = (sqrt 3/18) sin(2 s/sqrt 3).
    """
    s = np.asarray(s, dtype=float)
    k, m = 4 * SQRT3 / 3, 2 * SQRT3 / 3
    h23 = -SQRT3 / 36 * np.sin(k * s)
    b23 = -np.cos(k * s) / 9
    return np.stack(
        [
            s / 9,
            h23,
            h23,
            SQRT3 / 18 * np.sin(m * s),
            np.full_like(s, 1 / 9),
            b23,
            b23,
            np.cos(m * s) / 9,
        ],
        axis=-1,
    )


def sphere6_singular_h(s: np.ndarray) -> np.ndarray:
    """(a, b) of the rescaled sphere started at the singular orbit."""
    s = np.asarray(s, dtype=float)
    th = np.tanh(s)
    k = 1.0 / np.cosh(s) ** 2
    return np.stack(
        [
            th / 4,
            (4 - 10 * k) * th / 16,
            (1 - 2 * k) * th / 4,
            3 * k * th / 8,
            k / 4,
            (12 * k - 15 * k**2) / 8,
            (5 * k - 6 * k**2) / 4,
            3 * (3 * k**2 - 2 * k) / 8,
        ],
        axis=-1,
    )


SINGULAR_CURVES: dict[ModelId, Callable[[np.ndarray], np.ndarray]] = {
    ModelId.S3XS3: s3xs3_singular_h,
    ModelId.SPHERE6: sphere6_singular_h,
}

# Value of h1'(0) for each model meeting the singular orbit
SINGULAR_C1 = {ModelId.S3XS3: 1 / 9, ModelId.SPHERE6: 1 / 4}


def singular_model_curve(m: ModelId, s: np.ndarray) -> np.ndarray:
    """Closed-form singular h-curve of m on s, with integrals appended.

    Raises:
        DomainError: For TwistorCP3, which has no S^3 singular orbit.
    """
    m = ModelId(m)
    if m not in SINGULAR_CURVES:
        raise DomainError(f"{m.value} has no S^3 singular orbit")
    states = SINGULAR_CURVES[m](s)
    return np.column_stack([states, first_integrals_array(states, 2.0)])
