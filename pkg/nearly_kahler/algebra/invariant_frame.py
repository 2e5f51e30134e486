"""SU2 x SU2 invariant calculus along the normal geodesic.

The frame at gamma_t is (xi, A^, E1^, V1^, E2^, V2^) with dual coframe
(xi*, A*, E1*, V1*, E2*, V2*), declared positively oriented. Invariant
forms are KForms in that coframe; derivatives in t are carried by a
second KForm of the same degree.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from nearly_kahler.algebra.forms6 import (
    DIM,
    Endo6,
    KForm,
    basis_form,
    multi_indices,
    wedge,
    zero_form,
)
from nearly_kahler.errors import DomainError, NotStableError

logger = logging.getLogger(__name__)

# Lie algebra basis order
LIE_LABELS = ("U", "A", "E1", "V1", "E2", "V2")
# Frame order along gamma (U is replaced by the geodesic field xi)
FRAME_LABELS = ("xi", "A", "E1", "V1", "E2", "V2")
XI, A_HAT, E1, V1, E2, V2 = range(DIM)

# Order of the psi^{aj} basis and of PsiCoeffs.p / PsiCoeffs.phat
PSI_LABELS = ("12", "13", "14", "15", "22", "23", "24", "25")

ADMISSIBLE_TOL = 1e-8


# =============================================================================
# Lie algebra
# =============================================================================

_H = np.array([[0.5j, 0.0], [0.0, -0.5j]])
_E = np.array([[0.0, 1.0], [-1.0, 0.0]]) / (2.0 * math.sqrt(2.0))
_V = np.array([[0.0, 1.0j], [1.0j, 0.0]]) / (2.0 * math.sqrt(2.0))
_ZERO = np.zeros((2, 2), dtype=complex)


def su2_matrices() -> dict[str, np.ndarray]:
    """The 2x2 matrices H, E, V spanning su2."""
    return {"H": _H.copy(), "E": _E.copy(), "V": _V.copy()}


def lie_matrices() -> list[tuple[np.ndarray, np.ndarray]]:
    """U, A, E1, V1, E2, V2 as pairs of 2x2 matrices."""
    return [
        (_H, _H),
        (_H, -_H),
        (_E, _ZERO),
        (_V, _ZERO),
        (_ZERO, _E),
        (_ZERO, _V),
    ]


def _realify(pair: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    stacked = np.concatenate([pair[0].ravel(), pair[1].ravel()])
    return np.concatenate([stacked.real, stacked.imag])


def structure_constants_from_matrices() -> np.ndarray:
    """Structure constants c[i, j, k] computed from matrix commutators."""
    basis = lie_matrices()
    design = np.column_stack([_realify(b) for b in basis])
    consts = np.zeros((DIM, DIM, DIM))
    for i, x in enumerate(basis):
        for j, y in enumerate(basis):
            comm = tuple(a @ b - b @ a for a, b in zip(x, y, strict=True))
            solution, *_ = np.linalg.lstsq(design, _realify(comm), rcond=None)
            consts[i, j] = solution
    return consts


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Structure constants of su2 + su2 in the basis (U, A, E1, V1, E2, V2).

    ``brackets[i, j, k]`` is the k-th component of [X_i, X_j].
    """

    brackets: np.ndarray
    killing: np.ndarray = field(init=False)

    def __post_init__(self):
        ad = np.transpose(self.brackets, (0, 2, 1))
        killing = np.einsum("ikj,ijk->i", ad, ad)
        object.__setattr__(self, "killing", killing)

    def bracket(
        self, x: Sequence[float], y: Sequence[float]
    ) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.brackets)

    def killing_form(self) -> np.ndarray:
        """Full Cartan-Killing matrix B(X_i, X_j) = tr(ad X_i ad X_j)."""
        ad = np.transpose(self.brackets, (0, 2, 1))
        return np.einsum("ikl,jlk->ij", ad, ad)

    def jacobi_residual(self) -> float:
        c = self.brackets
        # [X,[Y,Z]] + [Y,[Z,X]] + [Z,[X,Y]]
        term = np.einsum("jkm,iml->ijkl", c, c)
        total = (
            term
            + np.transpose(term, (1, 2, 0, 3))
            + np.transpose(term, (2, 0, 1, 3))
        )
        return float(np.max(np.abs(total)))

    @property
    def frame_brackets(self) -> np.ndarray:
        """Brackets on the frame at gamma_t.

        xi commutes with everything and the U component is dropped,
        since U^ vanishes along gamma.
        """
        frame = self.brackets.copy()
        frame[0, :, :] = 0.0
        frame[:, 0, :] = 0.0
        frame[:, :, 0] = 0.0
        return frame


@lru_cache
def lie_basis() -> LieBasis:
    """Hard-coded brackets of (U, A, E1, V1, E2, V2).

    [H, E] = V, [H, V] = -E and [E, V] = H/2 in each su2 factor, with
    U = (H, H) and A = (H, -H).
    """
    c = np.zeros((DIM, DIM, DIM))
    u, a, e1, v1, e2, v2 = range(DIM)

    def put(i, j, values):
        c[i, j] = values
        c[j, i] = -np.asarray(values)

    def vec(**kwargs):
        out = np.zeros(DIM)
        for name, value in kwargs.items():
            out[LIE_LABELS.index(name)] = value
        return out

    put(u, e1, vec(V1=1.0))
    put(u, v1, vec(E1=-1.0))
    put(u, e2, vec(V2=1.0))
    put(u, v2, vec(E2=-1.0))
    put(a, e1, vec(V1=1.0))
    put(a, v1, vec(E1=-1.0))
    put(a, e2, vec(V2=-1.0))
    put(a, v2, vec(E2=1.0))
    put(e1, v1, vec(U=0.25, A=0.25))
    put(e2, v2, vec(U=0.25, A=-0.25))
    return LieBasis(brackets=c)


# =============================================================================
# Invariant forms
# =============================================================================


@lru_cache
def omega_basis() -> tuple[KForm, ...]:
    """omega^1 .. omega^5 at gamma_t."""
    return (
        basis_form((XI, A_HAT)),
        basis_form((E1, V1)),
        basis_form((E2, V2)),
        basis_form((E1, E2)) + basis_form((V1, V2)),
        basis_form((E1, V2)) - basis_form((V1, E2)),
    )


@lru_cache
def psi_basis() -> tuple[KForm, ...]:
    """psi^{1i} = xi* ^ omega^i and psi^{2i} = A* ^ omega^i, i = 2..5."""
    omegas = omega_basis()[1:]
    xi_star = basis_form((XI,))
    a_star = basis_form((A_HAT,))
    return tuple(wedge(xi_star, w) for w in omegas) + tuple(
        wedge(a_star, w) for w in omegas
    )


def invariant_volume() -> KForm:
    """xi* ^ A* ^ E1* ^ V1* ^ E2* ^ V2*, equal to omega^1^omega^2^omega^3."""
    return basis_form(tuple(range(DIM)))


def invariant_d(form: KForm, form_dot: KForm | None = None) -> KForm:
    """Exterior derivative of an invariant form along gamma.

    d(phi) = xi* ^ phi' + sum_{i<j} (-1)^{i+j} phi([X_i, X_j], ...),
    with the frame brackets of ``LieBasis.frame_brackets``.

    Args:
        form: The invariant k-form at gamma_t
        form_dot: Its t-derivative (omitted means constant coefficients)

    Returns:
        The (k+1)-form d(phi) at gamma_t

    """
    k = form.degree
    brackets = lie_basis().frame_brackets
    values = []
    for out in multi_indices(k + 1):
        total = 0.0
        for i, j in combinations(range(k + 1), 2):
            rest = tuple(x for n, x in enumerate(out) if n not in (i, j))
            sign = -1.0 if (i + j) % 2 else 1.0
            for m in range(DIM):
                coeff = brackets[out[i], out[j], m]
                if coeff:
                    total += sign * coeff * form.coefficient((m,) + rest)
        values.append(total)
    result = KForm(k + 1, values)
    if form_dot is not None:
        result = result + wedge(basis_form((XI,)), form_dot)
    return result


def omega_form(f: Sequence[float]) -> KForm:
    """sum_i f_i omega^i."""
    total = zero_form(2)
    for coeff, w in zip(f, omega_basis(), strict=True):
        total = total + float(coeff) * w
    return total


def d_invariant_2form(f: Sequence[float], fp: Sequence[float]) -> KForm:
    """d(sum f_i omega^i) at gamma_t."""
    return invariant_d(omega_form(f), omega_form(fp))


# =============================================================================
# Jets and coefficients
# =============================================================================


@dataclass(frozen=True, eq=False)
class FJet:
    """Values and first derivatives of f_1..f_5 at t."""

    t: float
    f: np.ndarray
    fp: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        for name in ("f", "fp"):
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != (5,):
                raise DomainError(f"FJet.{name} needs 5 values")
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if self.mu <= 0:
            raise DomainError(f"mu must be positive, got {self.mu}")

    @property
    def frak(self) -> float:
        return math.hypot(self.f[3], self.f[4])

    @property
    def frak_p(self) -> float:
        frak = self.frak
        if frak == 0.0:
            return math.hypot(self.fp[3], self.fp[4])
        return (self.f[3] * self.fp[3] + self.f[4] * self.fp[4]) / frak

    @property
    def phase(self) -> float:
        """theta_o with f4 = frak cos(theta_o), f5 = frak sin(theta_o)."""
        return math.atan2(self.f[4], self.f[3])

    @property
    def phase_residual(self) -> float:
        return float(self.f[3] * self.fp[4] - self.f[4] * self.fp[3])


@dataclass(frozen=True, eq=False)
class PsiCoeffs:
    """Coefficients of psi and psi^ in the psi^{aj} basis (PSI_LABELS)."""

    p: np.ndarray
    phat: np.ndarray
    q: float

    def get(self, label: str, hat: bool = False) -> float:
        values = self.phat if hat else self.p
        return float(values[PSI_LABELS.index(label)])

    @property
    def r(self) -> float:
        """p24^2 + p25^2."""
        return self.get("24") ** 2 + self.get("25") ** 2


def coefficients_from_f(j: FJet) -> PsiCoeffs:
    """psi = d(omega)/3 and psi^ = J*psi coefficients from a jet.

    Raises:
        DomainError: If f1 = 0 (p^14 and p^15 divide by f1).
    """
    f1, f2, f3, f4, f5 = j.f
    _, d2, d3, d4, d5 = j.fp
    if f1 == 0.0:
        raise DomainError("f1 = 0: hatted coefficients are undefined")
    p = np.array(
        [
            d2 / 3 + f1 / 12,
            d3 / 3 - f1 / 12,
            d4 / 3,
            d5 / 3,
            0.0,
            0.0,
            2 * f5 / 3,
            -2 * f4 / 3,
        ]
    )
    phat = np.array(
        [
            0.0,
            0.0,
            -2 * f5 / (3 * f1),
            2 * f4 / (3 * f1),
            f1 / 3 * (d2 + f1 / 4),
            f1 / 3 * (d3 - f1 / 4),
            f1 * d4 / 3,
            f1 * d5 / 3,
        ]
    )
    q = p[2] ** 2 + p[3] ** 2 - p[0] * p[1]
    return PsiCoeffs(p=p, phat=phat, q=float(q))


def _combine(values: Sequence[float]) -> KForm:
    total = zero_form(3)
    for coeff, form in zip(values, psi_basis(), strict=True):
        total = total + float(coeff) * form
    return total


def psi_form(c: PsiCoeffs) -> KForm:
    return _combine(c.p)


def psi_hat_form(c: PsiCoeffs) -> KForm:
    return _combine(c.phat)


def j_psi_matrix(c: PsiCoeffs) -> Endo6:
    """J_psi in the frame, block diagonal diag(K, L).

    Raises:
        NotStableError: If q <= 0 or p24^2 + p25^2 = 0.
    """
    q, r = c.q, c.r
    failed = [name for name, bad in (("q>0", q <= 0), ("r>0", r <= 0)) if bad]
    if failed:
        raise NotStableError(
            f"psi is not stable (q = {q:.3e}, p24^2+p25^2 = {r:.3e})",
            failed=failed,
        )
    p12, p13, p14, p15 = (c.get(x) for x in ("12", "13", "14", "15"))
    p24, p25 = c.get("24"), c.get("25")
    a = p14 * p25 - p15 * p24
    k_block = np.array(
        [[0.0, math.sqrt(r / q)], [-math.sqrt(q / r), 0.0]]
    )
    l_block = np.array(
        [
            [0.0, a, p13 * p25, -p13 * p24],
            [-a, 0.0, p13 * p24, p13 * p25],
            [p12 * p25, p12 * p24, 0.0, -a],
            [-p12 * p24, p12 * p25, a, 0.0],
        ]
    ) / math.sqrt(q * r)
    matrix = np.zeros((DIM, DIM))
    matrix[:2, :2] = k_block
    matrix[2:, 2:] = l_block
    return Endo6(matrix)


# =============================================================================
# Stability and metric
# =============================================================================


@dataclass
class StabilityReport:
    """Stability diagnostics of a jet."""

    p_psi: float
    p_psi_f: float
    constraint: float
    inequality: float
    ok: bool
    failed: list[str]


def constraint_value(j: FJet) -> float:
    """4 frak^2 - ((frak')^2 - (f2' + f1/4)(f3' - f1/4)) f1^2."""
    f1 = j.f[0]
    return 4 * j.frak**2 - stability_inequality(j) * f1**2


def stability_inequality(j: FJet) -> float:
    """(frak')^2 - (f2' + f1/4)(f3' - f1/4); positive on stable jets."""
    f1 = j.f[0]
    return j.frak_p**2 - (j.fp[1] + f1 / 4) * (j.fp[2] - f1 / 4)


def stability_data(j: FJet, tol: float = ADMISSIBLE_TOL) -> StabilityReport:
    """P(psi) in coefficient and f-variable form plus admissibility.

    The jet is admissible when f1 < 0, frak > 0 with constant phase,
    the stability inequality holds and the algebraic constraint
    vanishes within ``tol``.
    """
    f1, _, _, f4, f5 = j.f
    d4, d5 = j.fp[3], j.fp[4]
    p_psi_f = (
        -4.0
        / 81.0
        * (f4**2 + f5**2)
        * (d4**2 + d5**2 - (j.fp[1] + f1 / 4) * (j.fp[2] - f1 / 4))
    )
    p_psi = math.nan
    if f1 != 0.0:
        c = coefficients_from_f(j)
        p_psi = -c.r * c.q
    inequality = stability_inequality(j)
    constraint = constraint_value(j)
    checks = {
        "f1<0": f1 < 0,
        "frak>0": j.frak > 0,
        "phase": abs(j.phase_residual) <= tol,
        "inequality": inequality > 0,
        "constraint": abs(constraint) <= tol,
    }
    failed = [name for name, passed in checks.items() if not passed]
    if failed:
        logger.debug("Jet at t=%.6g fails %s", j.t, failed)
    return StabilityReport(
        p_psi=p_psi,
        p_psi_f=p_psi_f,
        constraint=constraint,
        inequality=inequality,
        ok=not failed,
        failed=failed,
    )


def metric_matrix(j: FJet, tol: float = ADMISSIBLE_TOL) -> np.ndarray:
    """Gram matrix of g = omega(., J_psi .) in the frame.

    Raises:
        NotStableError: If the jet is not admissible; ``failed`` lists
            the violated conditions.
    """
    report = stability_data(j, tol)
    if not report.ok:
        raise NotStableError(
            f"Jet at t={j.t} is not admissible: {', '.join(report.failed)}",
            failed=report.failed,
        )
    j_psi = j_psi_matrix(coefficients_from_f(j))
    omega = omega_form(j.f)
    # Omega[i, k] = omega(b_i, b_k)
    gram_omega = np.array(
        [
            [omega.coefficient((i, k)) if i != k else 0.0 for k in range(DIM)]
            for i in range(DIM)
        ]
    )
    return gram_omega @ j_psi.matrix


def volume_rescaling(j: FJet) -> float:
    """The factor c in omega^3 = c * vol; equals 6 f1 (f2 f3 - frak^2)."""
    omega = omega_form(j.f)
    return float(wedge(wedge(omega, omega), omega).coeffs[0])


def rescaled_stability(j: FJet) -> float:
    """P(psi) measured against the volume form omega^3.

    Raises:
        DomainError: If omega^3 vanishes.
    """
    scale = volume_rescaling(j)
    if scale == 0.0:
        raise DomainError(f"omega^3 vanishes at t={j.t}")
    return stability_data(j).p_psi_f / scale**2


def omega_wedge_psi(j: FJet) -> KForm:
    """omega ^ psi; equals d(omega ^ omega)/6 and vanishes on NK jets."""
    return wedge(omega_form(j.f), psi_form(coefficients_from_f(j)))


def _phat_derivatives(j: FJet, fpp: np.ndarray) -> np.ndarray:
    f1, _, _, f4, f5 = j.f
    g1, g2, g3, g4, g5 = j.fp
    _, h2, h3, h4, h5 = fpp
    return np.array(
        [
            0.0,
            0.0,
            -2.0 / 3.0 * (g5 * f1 - f5 * g1) / f1**2,
            2.0 / 3.0 * (g4 * f1 - f4 * g1) / f1**2,
            g1 / 3 * (g2 + f1 / 4) + f1 / 3 * (h2 + g1 / 4),
            g1 / 3 * (g3 - f1 / 4) + f1 / 3 * (h3 - g1 / 4),
            (g1 * g4 + f1 * h4) / 3,
            (g1 * g5 + f1 * h5) / 3,
        ]
    )


def nk_residual_forms(
    j: FJet, fpp: Sequence[float], tol: float = ADMISSIBLE_TOL
) -> tuple[KForm, KForm]:
    """The NK equations d(omega) = 3 psi and d(psi^) = -2 mu omega^omega.

    Args:
        j: Jet at t
        fpp: Second derivatives f_i'' at t
        tol: Admissibility tolerance

    Returns:
        (d(omega) - 3 psi, d(psi^) + 2 mu omega ^ omega)

    Raises:
        NotStableError: If the jet is not admissible.
    """
    report = stability_data(j, tol)
    if not report.ok:
        raise NotStableError(
            f"Jet at t={j.t} is not admissible: {', '.join(report.failed)}",
            failed=report.failed,
        )
    c = coefficients_from_f(j)
    fpp = np.asarray(fpp, dtype=float)
    first = d_invariant_2form(j.f, j.fp) - 3.0 * psi_form(c)
    psi_hat = psi_hat_form(c)
    psi_hat_dot = _combine(_phat_derivatives(j, fpp))
    omega = omega_form(j.f)
    second = invariant_d(psi_hat, psi_hat_dot) + 2.0 * j.mu * wedge(
        omega, omega
    )
    return first, second
