"""Solutions starting at the singular S^3 orbit.

In the variables h1 = s p1, h2 = s p2, h3 = s (p3 - p1), h4 = s p4 the
h-system with mu = 2 reads

    P'' = A(P)/s^2 + B(P, P')/s + C(s, P, P')

and a smooth odd solution is fixed by p1(0) = c1 > 0. The even series
of P is computed order by order, evaluated near s = 0 and handed to the
integrator away from the orbit.

Writing q = P', d = p3 - p1 and Delta = p2^2 - d^2 - p4^2:

    A = (-2 (9 p1^2 d + p4^2) / (9 Delta), 0, 0, 0)
    B = (-2 q1 - 2 (18 p1 q1 d + p4 q4) / (9 Delta), -2 q2, -2 q3, -2 q4)
    C = (-2 q1^2 d / Delta,
         -48 p1 p2 - 48 s q1 p2,
         -48 p1 d - 48 s q1 d,
         -4 p4 (12 p1 - 1) - 48 s q1 p4)
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from nearly_kahler.algebra.invariant_frame import (
    FJet,
    metric_matrix,
    rescaled_stability,
    stability_data,
)
from nearly_kahler.config import settings
from nearly_kahler.errors import (
    DomainError,
    HandoffError,
    NKError,
    NotStableError,
)
from nearly_kahler.models.homogeneous import SINGULAR_CURVES, ModelId
from nearly_kahler.ode.curves import FCurve, HState, SolutionCurve
from nearly_kahler.ode.nk_ode import first_integrals_array, from_h, integrate
from nearly_kahler.ode.transforms import apply_to_states, point_group
from nearly_kahler.singular.taylor import TaylorJet4, TaylorSeries

logger = logging.getLogger(__name__)

SINGULAR_MU = 2.0

# Relations hold to this accuracy in extension_conditions
EXTENSION_TOL = 1e-9

# Number of overlap samples compared at the handoff
OVERLAP_SAMPLES = 11


# =============================================================================
# Smooth extension across the singular orbit
# =============================================================================


@dataclass(frozen=True, eq=False)
class ExtensionJet:
    """alpha_i = f_i(0) and beta_i = f_i'(0) at the singular orbit."""

    alpha: np.ndarray
    beta: np.ndarray
    parity: tuple[str, ...] = ("even", "odd", "odd", "even", "odd")

    def __post_init__(self):
        for name in ("alpha", "beta"):
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != (5,):
                raise DomainError(f"ExtensionJet.{name} needs 5 values")
            values.setflags(write=False)
            object.__setattr__(self, name, values)


@dataclass
class ExtensionReport:
    """Outcome of the smooth-extension test with its diagnostics."""

    ok: bool
    odd_vanish: bool
    alpha4_zero: bool
    beta3_relation: float
    beta5_relation: float
    even_derivatives_vanish: bool
    nondegenerate: bool
    beta_sum: float
    alpha1_relation: float


def extension_conditions(
    j: ExtensionJet, tol: float = EXTENSION_TOL
) -> ExtensionReport:
    """Smooth extension of a jet across the singular orbit.

    The jet extends iff the odd functions vanish at 0, alpha4 = 0,
    beta3 = alpha1/2 + beta2 and beta5 = -alpha1/4 - beta2. The report
    also carries alpha1 != 0 (non-degenerate orbit volume), the
    vanishing of beta for the even functions, and the derived relations
    beta2 + beta3 + 2 beta5 = 0 and alpha1 = 2 (beta3 - beta2).
    """
    alpha, beta = j.alpha, j.beta
    odd = [i for i, p in enumerate(j.parity) if p == "odd"]
    even = [i for i, p in enumerate(j.parity) if p == "even"]
    beta3_relation = beta[2] - (alpha[0] / 2 + beta[1])
    beta5_relation = beta[4] - (-alpha[0] / 4 - beta[1])
    odd_vanish = bool(np.all(np.abs(alpha[odd]) <= tol))
    alpha4_zero = abs(alpha[3]) <= tol
    ok = (
        odd_vanish
        and alpha4_zero
        and abs(beta3_relation) <= tol
        and abs(beta5_relation) <= tol
    )
    return ExtensionReport(
        ok=bool(ok),
        odd_vanish=odd_vanish,
        alpha4_zero=bool(alpha4_zero),
        beta3_relation=float(beta3_relation),
        beta5_relation=float(beta5_relation),
        even_derivatives_vanish=bool(np.all(np.abs(beta[even]) <= tol)),
        nondegenerate=bool(abs(alpha[0]) > tol),
        beta_sum=float(beta[1] + beta[2] + 2 * beta[4]),
        alpha1_relation=float(alpha[0] - 2 * (beta[2] - beta[1])),
    )


def singular_initial_state(c1: float) -> HState:
    """State at s = 0: h = 0 and h' = (c1, -3 c1^1.5, -c1, 3 c1^1.5)."""
    if c1 <= 0:
        raise DomainError(f"c1 must be positive, got {c1}")
    root = c1 * math.sqrt(c1)
    return HState(
        s=0.0,
        a=np.zeros(4),
        b=np.array([c1, -3 * root, -c1, 3 * root]),
        mu=SINGULAR_MU,
    )


def singular_limit_condition(b: Sequence[float]) -> float:
    """b1^3 - b4^2/9, which vanishes for data reaching the singular orbit."""
    return float(b[0] ** 3 - b[3] ** 2 / 9)


def extension_jet_from_state(x: HState) -> ExtensionJet:
    """Jet at the orbit of the solution with h = 0, h' = x.b there."""
    b1, b2, b3, b4 = x.b
    f1 = -math.sqrt(2 * b1)
    return ExtensionJet(
        alpha=np.array([f1, 0.0, 0.0, 0.0, 0.0]),
        beta=np.array(
            [
                0.0,
                (b2 + b3) / (2 * f1),
                (b2 - b3) / (2 * f1),
                0.0,
                b4 / (2 * f1),
            ]
        ),
    )


def stability_limit(j: ExtensionJet) -> float:
    """Limit at the orbit of P(psi) measured against omega^3.

    Equals -4^5 beta5^4 / (9^3 alpha1^8).
    """
    return float(-(4**5) * j.beta[4] ** 4 / (9**3 * j.alpha[0] ** 8))


# =============================================================================
# The p-system
# =============================================================================


def initial_p(c1: float) -> np.ndarray:
    """P(0) = (c1, -3 c1^1.5, 0, 3 c1^1.5)."""
    if c1 <= 0:
        raise DomainError(f"c1 must be positive, got {c1}")
    root = c1 * math.sqrt(c1)
    return np.array([c1, -3 * root, 0.0, 3 * root])


def p_system_rhs(
    s: float, p: Sequence[float], q: Sequence[float]
) -> np.ndarray:
    """P'' from the h-system with mu = 2 written in the p-variables.

    Raises:
        DomainError: If s = 0 or p2^2 - (p3 - p1)^2 - p4^2 = 0.
    """
    if s == 0.0:
        raise DomainError("the p-system is singular at s = 0")
    p1, p2, p3, p4 = p
    q1, q2, q3, q4 = q
    d = p3 - p1
    delta = p2**2 - d**2 - p4**2
    if delta == 0.0:
        raise DomainError(f"p-system denominator vanishes at s={s}")
    b1 = p1 + s * q1
    numerator = 2 * b1**2 * d + 2 / 9 * p4 * (p4 + s * q4)
    return np.array(
        [
            -2 * q1 / s - numerator / (s**2 * delta),
            -2 * q2 / s - 48 * b1 * p2,
            -2 * q3 / s - 48 * b1 * d,
            -2 * q4 / s - 48 * b1 * p4 + 4 * p4,
        ]
    )


def _abc(p, q, s, inv_delta):
    p1, p2, p3, p4 = p
    q1, q2, q3, q4 = q
    d = p3 - p1
    zero = p1 * 0.0
    a = (-2.0 / 9.0 * (9 * p1 * p1 * d + p4 * p4) * inv_delta, zero, zero, zero)
    b = (
        -2 * q1 - 2.0 / 9.0 * (18 * p1 * q1 * d + p4 * q4) * inv_delta,
        -2 * q2,
        -2 * q3,
        -2 * q4,
    )
    sq1 = s * q1
    c = (
        -2 * q1 * q1 * d * inv_delta,
        -48 * p1 * p2 - 48 * sq1 * p2,
        -48 * p1 * d - 48 * sq1 * d,
        -4 * p4 * (12 * p1 - 1) - 48 * sq1 * p4,
    )
    return a, b, c


def abc_pointwise(
    s: float, p: Sequence[float], q: Sequence[float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A, B, C evaluated at a point."""
    p1, p2, p3, p4 = p
    delta = p2**2 - (p3 - p1) ** 2 - p4**2
    if delta == 0.0:
        raise DomainError("p-system denominator vanishes")
    a, b, c = _abc(tuple(p), tuple(q), s, 1.0 / delta)
    return np.array(a), np.array(b), np.array(c)


def abc_decomposition(
    p: TaylorJet4, q: TaylorJet4
) -> tuple[TaylorJet4, TaylorJet4, TaylorJet4]:
    """Truncated series of A(P), B(P, Q) and C(s, P, Q).

    Raises:
        SeriesError: If the series of Delta has zero constant term.
    """
    ps, qs = p.components(), q.components()
    p1, p2, p3, p4 = ps
    d = p3 - p1
    inv_delta = (p2 * p2 - d * d - p4 * p4).reciprocal()
    s = TaylorSeries.variable(p.order)
    a, b, c = _abc(ps, qs, s, inv_delta)
    return (
        TaylorJet4.from_components(a),
        TaylorJet4.from_components(b),
        TaylorJet4.from_components(c),
    )


def a_jacobian(p: Sequence[float]) -> np.ndarray:
    """dA/dP at P."""
    p1, p2, p3, p4 = p
    d = p3 - p1
    delta = p2**2 - d**2 - p4**2
    numerator = 9 * p1**2 * d + p4**2
    d_num = np.array([18 * p1 * d - 9 * p1**2, 0.0, 9 * p1**2, 2 * p4])
    d_delta = np.array([2 * d, 2 * p2, -2 * d, -2 * p4])
    jac = np.zeros((4, 4))
    jac[0] = -2 / (9 * delta) * d_num + 2 * numerator / (9 * delta**2) * d_delta
    return jac


def b_q_jacobian(p: Sequence[float]) -> np.ndarray:
    """dB/dQ at P; B is linear in Q."""
    p1, p2, p3, p4 = p
    d = p3 - p1
    delta = p2**2 - d**2 - p4**2
    jac = -2 * np.eye(4)
    jac[0, 0] = -2 - 4 * p1 * d / delta
    jac[0, 3] = -2 * p4 / (9 * delta)
    return jac


def jacobians_at_origin(c1: float) -> tuple[np.ndarray, np.ndarray]:
    """(dA, dB/dQ) at (P(0), 0)."""
    p0 = initial_p(c1)
    return a_jacobian(p0), b_q_jacobian(p0)


def l_matrix(n: int, c1: float) -> np.ndarray:
    """Id - dA/((2n+2)(2n+1)) - (dB/dQ)/(2n+1) at the initial point."""
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    d_a, d_b = jacobians_at_origin(c1)
    return np.eye(4) - d_a / ((2 * n + 2) * (2 * n + 1)) - d_b / (2 * n + 1)


def l_matrix_determinant(n: int) -> float:
    """Closed form of det l_matrix(n, c1); independent of c1."""
    return (
        (2 * n + 5) * (n + 2) / ((n + 1) * (2 * n + 1))
        * ((2 * n + 3) / (2 * n + 1)) ** 3
    )


def reflected_determinant(n: int) -> float:
    """det(2 Id - l_matrix(n, c1)).

    Equals (2n^2 - 3n - 8)/((2n+1)(n+1)) ((2n-1)/(2n+1))^3, the
    determinant obtained when both Jacobians enter with opposite sign.
    """
    return (
        (2 * n**2 - 3 * n - 8) / ((2 * n + 1) * (n + 1))
        * ((2 * n - 1) / (2 * n + 1)) ** 3
    )


# =============================================================================
# Series solution
# =============================================================================


@dataclass(frozen=True, eq=False)
class SeriesSolution:
    """Even series P(s) = sum_n P_2n s^2n / (2n)!.

    Attributes:
        c1: p1(0)
        coeffs: P_0, P_2, ..., P_2N
        taylor: Ordinary coefficients pi_k = P_k / k!, shape (2N+1, 4)
        radius_estimate: Root-test estimate of the convergence radius
    """

    c1: float
    coeffs: list[np.ndarray]
    taylor: np.ndarray
    radius_estimate: float

    @property
    def series(self) -> TaylorJet4:
        return TaylorJet4(self.taylor)

    def p(self, s: float) -> np.ndarray:
        return self.series(s)

    def q(self, s: float) -> np.ndarray:
        return self.series.derivative()(s)

    def q_prime(self, s: float) -> np.ndarray:
        return self.series.derivative().derivative()(s)

    def h_vector(self, s: float) -> np.ndarray:
        """(a, b) of the h-solution at s."""
        p1, p2, p3, p4 = self.p(s)
        q1, q2, q3, q4 = self.q(s)
        return np.array(
            [
                s * p1,
                s * p2,
                s * (p3 - p1),
                s * p4,
                p1 + s * q1,
                p2 + s * q2,
                (p3 - p1) + s * (q3 - q1),
                p4 + s * q4,
            ]
        )

    def residual(self, s: float) -> np.ndarray:
        """P'' - rhs of the p-system for the truncated polynomial."""
        return self.q_prime(s) - p_system_rhs(s, self.p(s), self.q(s))


def _radius_estimate(taylor: np.ndarray) -> float:
    estimates = []
    n_max = (taylor.shape[0] - 1) // 2
    for n in range(max(1, n_max // 2), n_max + 1):
        norm = float(np.max(np.abs(taylor[2 * n])))
        if norm > 0:
            estimates.append(norm ** (-1.0 / (2 * n)))
    # Entire to working precision
    return min(estimates) if estimates else 1e3


def series_coefficients(c1: float, order: int | None = None) -> SeriesSolution:
    """Even series coefficients P_0..P_2N of the singular solution.

    Each P_2n+2 solves l_matrix(n) pi = D / ((2n+2)(2n+1)), where D is the
    s^(2n) coefficient of A/s^2 + B/s + C with the unknown set to zero.

    Args:
        c1: p1(0) > 0
        order: N, defaults to settings.series_order

    Raises:
        DomainError: If c1 <= 0 or N < 1.
        SeriesError: If the denominator series degenerates.
    """
    order = settings.series_order if order is None else order
    if order < 1:
        raise DomainError(f"series order must be at least 1, got {order}")
    taylor = np.zeros((2 * order + 1, 4))
    taylor[0] = initial_p(c1)
    for n in range(order):
        k = 2 * n + 2
        p = TaylorJet4(taylor[: k + 1])
        a, b, c = abc_decomposition(p, p.derivative())
        rhs = a.coefficient(k) + b.coefficient(k - 1) + c.coefficient(k - 2)
        taylor[k] = np.linalg.solve(l_matrix(n, c1), rhs / (k * (k - 1)))
    coeffs = [
        math.factorial(2 * n) * taylor[2 * n] for n in range(order + 1)
    ]
    radius = _radius_estimate(taylor)
    logger.debug(
        "Series for c1=%.6g to order %d, radius estimate %.3g",
        c1,
        2 * order,
        radius,
    )
    return SeriesSolution(
        c1=c1, coeffs=coeffs, taylor=taylor, radius_estimate=radius
    )


# =============================================================================
# Hybrid series + integrator solve
# =============================================================================


class _HybridCurve:
    """Dense output: series for |s| <= s_switch, integrator beyond."""

    def __init__(self, series: SeriesSolution, s_switch: float, ode):
        self._series = series
        self._s_switch = s_switch
        self._ode = ode

    def __call__(self, s: float) -> np.ndarray:
        if abs(s) <= self._s_switch or self._ode is None:
            return self._series.h_vector(s)
        return np.asarray(self._ode(s), dtype=float)


def solve_singular_ivp(
    c1: float,
    s_max: float = 0.2,
    order: int | None = None,
    s_switch: float | None = None,
    tol: float | None = None,
    n_points: int = 201,
) -> SolutionCurve:
    """The odd h-solution with h1'(0) = c1 on [0, s_max].

    A negative s_max solves on [s_max, 0] through the same series.

    Args:
        c1: h1'(0) > 0
        s_max: End of the s-range
        order: Series order N
        s_switch: Handoff point, defaults to
            min(settings.series_switch, settings.switch_fraction * radius)
        tol: Integrator tolerance
        n_points: Output nodes

    Raises:
        DomainError: On invalid c1, s_max or s_switch.
        HandoffError: If series and integrator disagree on the overlap.
        SingularityError, StiffnessError: From the integrator.
    """
    tol = settings.tol if tol is None else tol
    if s_max == 0.0:
        raise DomainError("s_max must be non-zero")
    series = series_coefficients(c1, order)
    radius = series.radius_estimate
    if s_switch is None:
        s_switch = min(
            settings.series_switch, settings.switch_fraction * radius
        )
    s_switch = min(s_switch, abs(s_max))
    if not 0 < s_switch <= 0.5 * radius:
        raise DomainError(
            f"s_switch={s_switch} must lie in (0, {0.5 * radius:.4g}]"
        )
    sign = math.copysign(1.0, s_max)
    start = sign * s_switch

    ode = None
    mismatch = 0.0
    if s_switch < abs(s_max):
        x_switch = HState.from_vector(start, series.h_vector(start), SINGULAR_MU)
        ode = integrate(x_switch, (start, s_max), tol=tol, n_points=n_points)
        end = sign * min(1.1 * s_switch, abs(s_max))
        window = np.linspace(start, end, OVERLAP_SAMPLES)
        mismatch = max(
            float(np.max(np.abs(ode(s) - series.h_vector(s)))) for s in window
        )
        if mismatch > 10 * tol:
            raise HandoffError(
                f"series and integrator differ by {mismatch:.3e} on "
                f"[{start:.4g}, {end:.4g}]"
            )

    dense = _HybridCurve(series, s_switch, ode)
    grid = np.linspace(0.0, s_max, n_points)
    states = np.array([dense(s) for s in grid])
    integrals = first_integrals_array(states, SINGULAR_MU)
    drift = np.max(np.abs(integrals - integrals[0]), axis=0)
    logger.debug(
        "Singular solve c1=%.6g on [0, %.4g]: switch %.4g, mismatch %.3e",
        c1,
        s_max,
        s_switch,
        mismatch,
    )
    return SolutionCurve(
        grid=grid,
        states=states,
        mu=SINGULAR_MU,
        integrals=integrals,
        drift=drift,
        meta={
            "c1": c1,
            "order": len(series.coeffs) - 1,
            "s_switch": s_switch,
            "s_max": s_max,
            "radius_estimate": radius,
            "handoff_mismatch": mismatch,
            "steps": ode.meta["steps"] if ode is not None else 0,
            "phase": math.pi / 2,
        },
        interpolant=dense,
    )


def matched_model(
    curve: SolutionCurve, tol: float | None = None
) -> ModelId | None:
    """The homogeneous model whose singular h-curve equals curve up to T."""
    tol = settings.match_tol if tol is None else tol
    for model, closed_form in SINGULAR_CURVES.items():
        reference = closed_form(curve.grid)
        distance = min(
            float(np.max(np.abs(curve.states - apply_to_states(tag, reference))))
            for tag in point_group()
        )
        if distance < tol:
            return model
    return None


# =============================================================================
# Reconstruction of the NK structure
# =============================================================================


@dataclass
class NKVerification:
    """Checks on the NK structure built from a singular solution."""

    extension: ExtensionReport
    stability_ok: bool
    stability_limit: float
    stability_near_orbit: float
    stability_max: float
    positivity_ok: bool
    min_eigenvalue: float
    valid_s_max: float
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.extension.ok and self.stability_ok and self.positivity_ok


def _check_jet(j: FJet) -> tuple[float, float]:
    """(rescaled P, smallest metric eigenvalue) at a regular jet."""
    report = stability_data(j)
    if not report.ok:
        raise NotStableError(
            f"jet at t={j.t:.6g} fails {report.failed}", failed=report.failed
        )
    gram = metric_matrix(j)
    eigenvalues = np.linalg.eigvalsh((gram + gram.T) / 2)
    return rescaled_stability(j), float(eigenvalues.min())


def reconstruct_nk(
    c1: float,
    s_max: float = 0.2,
    order: int | None = None,
    s_switch: float | None = None,
    tol: float | None = None,
    n_points: int = 201,
) -> tuple[SolutionCurve, FCurve, NKVerification]:
    """Solve from the singular orbit and verify the resulting structure.

    The f-curve has f4 = 0 and f5 = h4/2. Every failed check is listed
    in the report rather than raised.

    Returns:
        (h-curve, f-curve, verification report)
    """
    curve = solve_singular_ivp(c1, s_max, order, s_switch, tol, n_points)
    fcurve = from_h(curve, t_o=0.0, s_o=0.0, phase=math.pi / 2)
    jet0 = extension_jet_from_state(singular_initial_state(c1))
    extension = extension_conditions(jet0)
    failures = [] if extension.ok else ["extension"]
    limit = stability_limit(jet0)

    s_nodes = np.asarray(fcurve.meta["s"])
    order_by_s = np.argsort(np.abs(s_nodes))
    values, eigen = [], []
    valid_s_max = 0.0
    broken = False
    for k in order_by_s:
        if s_nodes[k] == 0.0:
            continue
        try:
            value, smallest = _check_jet(fcurve.jet(int(k)))
        except NKError as err:
            failures.append(f"s={s_nodes[k]:.4g}: {err}")
            broken = True
            continue
        values.append(value)
        eigen.append(smallest)
        if value >= 0 or smallest <= 0:
            failures.append(f"s={s_nodes[k]:.4g}: P={value:.3e}, min eig={smallest:.3e}")
            broken = True
        elif not broken:
            valid_s_max = float(s_nodes[k])
    if broken:
        logger.warning(
            "Verification for c1=%.6g failed beyond s=%.4g", c1, valid_s_max
        )
    return (
        curve,
        fcurve,
        NKVerification(
            extension=extension,
            stability_ok=bool(values) and max(values) < 0 and limit < 0,
            stability_limit=limit,
            stability_near_orbit=values[0] if values else math.nan,
            stability_max=max(values) if values else math.nan,
            positivity_ok=bool(eigen) and min(eigen) > 0 and not broken,
            min_eigenvalue=min(eigen) if eigen else math.nan,
            valid_s_max=valid_s_max,
            failures=failures,
        ),
    )
