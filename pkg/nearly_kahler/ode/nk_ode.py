"""The f-system, the regular h-system and the constraint variety N.
Uses scipy solve_ivp (DOP853, dense output, terminal events) for
integration, quad for the change of variables and least_squares for
projecting onto N.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import least_squares

from nearly_kahler.algebra.invariant_frame import FJet, constraint_value
from nearly_kahler.config import settings
from nearly_kahler.errors import (
    DomainError,
    MembershipError,
    SingularityError,
    StiffnessError,
)
from nearly_kahler.ode.curves import FCurve, HState, SolutionCurve

logger = logging.getLogger(__name__)

# |a2^2 - a3^2 - a4^2| below this times (1 + |a|^2) counts as singular
DENOMINATOR_EPS = 1e-12

# Absolute and relative tolerance of every quad call
QUAD_TOL = 1e-13

DEFAULT_POINTS = 201


# =============================================================================
# f-system
# =============================================================================


def f_system_residual(j: FJet, fpp: Sequence[float]) -> np.ndarray:
    """Residuals of the four NK equations and of the algebraic constraint.

    Args:
        j: Jet (f, f') at t with its mu
        fpp: Second derivatives f_i''

    Returns:
        Five residuals, the last being the constraint value

    Raises:
        DomainError: If f1 = 0.
    """
    f1, f2, f3, f4, f5 = j.f
    g1, g2, g3, g4, g5 = j.fp
    h1, h2, h3, h4, h5 = np.asarray(fpp, dtype=float)
    if f1 == 0.0:
        raise DomainError("f-system residual is undefined at f1 = 0")
    mu = j.mu
    frak, frak_p = j.frak, j.frak_p
    frak_pp = 0.0
    if frak > 0.0:
        frak_pp = (g4**2 + f4 * h4 + g5**2 + f5 * h5 - frak_p**2) / frak
    eq1 = (h2 + g1 / 4) * f1 + (g2 + f1 / 4) * g1 + 12 * mu * f1 * f2
    eq2 = (h3 - g1 / 4) * f1 + (g3 - f1 / 4) * g1 + 12 * mu * f1 * f3
    eq3 = frak_pp * f1 + frak_p * g1 - 4 * frak / f1 + 12 * mu * f1 * frak
    eq4 = f1 * (g2 - g3 + f1 / 2) + 48 * mu * (f2 * f3 - frak**2)
    return np.array([eq1, eq2, eq3, eq4, constraint_value(j)])


# =============================================================================
# h-system
# =============================================================================


def denominator(a: Sequence[float]) -> float:
    """h2^2 - h3^2 - h4^2."""
    return float(a[1] ** 2 - a[2] ** 2 - a[3] ** 2)


def _is_singular(a: np.ndarray) -> bool:
    return abs(denominator(a)) < DENOMINATOR_EPS * (1.0 + float(a @ a))


def _h_field(y: np.ndarray, mu: float) -> np.ndarray:
    a2, a3, a4 = y[1], y[2], y[3]
    b1, b4 = y[4], y[7]
    frac = (2 * b1**2 * a3 + 4 / (9 * mu) * b4 * a4) / (
        a2**2 - a3**2 - a4**2
    )
    return np.array(
        [
            y[4],
            y[5],
            y[6],
            y[7],
            -frac,
            -24 * mu * b1 * a2,
            frac - 24 * mu * b1 * a3,
            -24 * mu * b1 * a4 + 4 * a4,
        ]
    )


def h_rhs(x: HState) -> np.ndarray:
    """(b, b') for the regular h-system.

    Raises:
        SingularityError: If the denominator h2^2 - h3^2 - h4^2 vanishes.
    """
    if _is_singular(x.a):
        raise SingularityError(
            f"h-system denominator vanishes at s={x.s}", s=x.s
        )
    return _h_field(x.vector, x.mu)


def _integrals(a: np.ndarray, b: np.ndarray, mu: float) -> np.ndarray:
    a2, a3, a4 = a[..., 1], a[..., 2], a[..., 3]
    b1, b2, b3, b4 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    den = a2**2 - a3**2 - a4**2
    return np.stack(
        [
            12 * mu * den + b1 + b3,
            4 * a4**2 + b2**2 - b3**2 - b4**2 - b1**2 - 2 * b3 * b1,
            a2 * b2 - a3 * b3 - a4 * b4 - a3 * b1,
            9 * mu / 2 * b1 * den + a4**2,
        ],
        axis=-1,
    )


def first_integrals(x: HState) -> np.ndarray:
    """The four first integrals I^1..I^4 of the h-system."""
    return _integrals(x.a, x.b, x.mu)


def first_integrals_array(states: np.ndarray, mu: float) -> np.ndarray:
    """First integrals of an (n, 8) array of states."""
    states = np.asarray(states, dtype=float)
    return _integrals(states[..., :4], states[..., 4:], mu)


def auxiliary_identities(x: HState) -> np.ndarray:
    """The relations h3' + h1' + 12 mu (h2^2 - h3^2 - h4^2) = 0 and
    h1'(h2^2 - h3^2 - h4^2) + 2 h4^2/(9 mu) = 0 along h-solutions."""
    den = denominator(x.a)
    return np.array(
        [
            x.b[2] + x.b[0] + 12 * x.mu * den,
            x.b[0] * den + 2 * x.a[3] ** 2 / (9 * x.mu),
        ]
    )


@dataclass
class MembershipReport:
    """Which of the conditions defining N hold at a state."""

    integrals: list[float]
    integrals_ok: bool
    b1_positive: bool
    short_inequality: bool
    full_inequality: bool

    @property
    def member(self) -> bool:
        return (
            self.integrals_ok
            and self.b1_positive
            and self.full_inequality
        )


def membership_report(x: HState, tol: float | None = None) -> MembershipReport:
    """Evaluate the defining conditions of N at x.

    Both inequality variants are reported: b2^2 - b3^2 - b4^2 < 0 and
    b2^2 - b3^2 - b4^2 - b1^2 - 2 b1 b3 < 0. Only the second enters
    membership; it equals -4 f1^2 times the stability inequality.
    """
    tol = settings.membership_tol if tol is None else tol
    b1, b2, b3, b4 = x.b
    values = first_integrals(x)
    short = b2**2 - b3**2 - b4**2
    return MembershipReport(
        integrals=[float(v) for v in values],
        integrals_ok=bool(np.all(np.abs(values) < tol)),
        b1_positive=bool(b1 > 0),
        short_inequality=bool(short < 0),
        full_inequality=bool(short - b1**2 - 2 * b1 * b3 < 0),
    )


def n_membership(x: HState, tol: float | None = None) -> bool:
    return membership_report(x, tol).member


def require_membership(x: HState, tol: float | None = None) -> None:
    """Raise MembershipError listing |I^k| when x is not in N."""
    report = membership_report(x, tol)
    if not report.member:
        raise MembershipError(
            "initial data is not in N: |I| = "
            + ", ".join(f"{abs(v):.3e}" for v in report.integrals),
            integrals=[abs(v) for v in report.integrals],
        )


# =============================================================================
# Integration
# =============================================================================


def integrate(
    x0: HState,
    span: tuple[float, float],
    tol: float | None = None,
    n_points: int = DEFAULT_POINTS,
    max_step: float | None = None,
) -> SolutionCurve:
    """Integrate the h-system from x0 over span.

    The integration stops on a sign change of the denominator and the
    first integrals are monitored at every accepted step.

    Args:
        x0: Initial state; span[0] is taken as its s-value
        span: (s_start, s_end), either direction
        tol: rtol = atol, defaults to settings.tol
        n_points: Number of equally spaced output nodes
        max_step: Maximum step, defaults to settings.max_step

    Returns:
        SolutionCurve sampled on the output nodes with dense output

    Raises:
        SingularityError: If the denominator vanishes on the span.
        StiffnessError: If the integrator fails to advance.
    """
    tol = settings.tol if tol is None else tol
    max_step = settings.max_step if max_step is None else max_step
    s0, s1 = float(span[0]), float(span[1])
    if s0 == s1:
        raise DomainError("integration span is empty")
    if _is_singular(x0.a):
        raise SingularityError(
            f"h-system denominator vanishes at s={s0}", s=s0
        )
    mu = x0.mu

    def rhs(_s: float, y: np.ndarray) -> np.ndarray:
        return _h_field(y, mu)

    def crossing(_s: float, y: np.ndarray) -> float:
        return y[1] ** 2 - y[2] ** 2 - y[3] ** 2

    crossing.terminal = True  # type: ignore[attr-defined]

    grid = np.linspace(s0, s1, n_points)
    sol = solve_ivp(
        rhs,
        (s0, s1),
        x0.vector,
        method=settings.method,
        t_eval=grid,
        dense_output=True,
        events=[crossing],
        rtol=tol,
        atol=tol,
        max_step=max_step,
    )
    if sol.status == 1:
        s_hit = float(sol.t_events[0][0])
        logger.warning("Denominator crossing at s=%.6g", s_hit)
        raise SingularityError(
            f"h-system denominator vanishes at s={s_hit:.6g}", s=s_hit
        )
    if sol.status != 0:
        raise StiffnessError(f"integrator stopped: {sol.message}")

    states = sol.y.T
    integrals = first_integrals_array(states, mu)
    steps = sol.sol(sol.sol.ts).T
    reference = integrals[0]
    drift = np.maximum(
        np.max(np.abs(integrals - reference), axis=0),
        np.max(np.abs(first_integrals_array(steps, mu) - reference), axis=0),
    )
    if drift.max() > 100 * tol:
        logger.warning(
            "First-integral drift %.3e exceeds 100 x tol", drift.max()
        )
    logger.debug(
        "Integrated over [%.4g, %.4g]: %d steps, %d evaluations, drift %.3e",
        s0,
        s1,
        len(sol.sol.ts) - 1,
        sol.nfev,
        drift.max(),
    )
    return SolutionCurve(
        grid=grid,
        states=states,
        mu=mu,
        integrals=integrals,
        drift=drift,
        meta={
            "method": settings.method,
            "tol": tol,
            "steps": len(sol.sol.ts) - 1,
            "nfev": int(sol.nfev),
        },
        interpolant=sol.sol,
    )


# =============================================================================
# Change of variables
# =============================================================================


def _quad(func: Callable[[float], float], lo: float, hi: float) -> float:
    value, _ = quad(func, lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return float(value)


def h_vector_from_f(
    f: np.ndarray, fp: np.ndarray, h1: float, signed: bool = False
) -> np.ndarray:
    """(a, b) at a point with f1 < 0 and h1 already integrated.

    With ``signed`` the fourth function is h4 = 2 f5 (f4 = 0 branch),
    otherwise h4 = 2 frak.
    """
    f1, f2, f3, f4, f5 = f
    g2, g3, g4, g5 = fp[1:]
    if signed:
        frak, frak_p = f5, g5
    else:
        frak = math.hypot(f4, f5)
        frak_p = (f4 * g4 + f5 * g5) / frak if frak > 0 else math.hypot(g4, g5)
    return np.array(
        [
            h1,
            f2 + f3,
            f2 - f3,
            2 * frak,
            f1**2 / 2,
            (g2 + g3) * f1,
            (g2 - g3) * f1,
            2 * frak_p * f1,
        ]
    )


class _ReparametrizedCurve:
    """Dense h-output of a converted f-curve: s -> t(s) -> (a, b)."""

    def __init__(
        self,
        fcurve: FCurve,
        s_nodes: np.ndarray,
        t_nodes: np.ndarray,
        h1_nodes: np.ndarray,
    ):
        self._fcurve = fcurve
        self._s = s_nodes
        self._t = t_nodes
        self._h1 = h1_nodes
        f1_nodes = np.array([fcurve.value(t)[0][0] for t in t_nodes])
        # dt/ds = f1
        self._guess = CubicHermiteSpline(s_nodes, t_nodes, f1_nodes)

    def _f1(self, t: float) -> float:
        return float(self._fcurve.value(t)[0][0])

    def t_of(self, s: float) -> float:
        k = int(np.argmin(np.abs(self._s - s)))
        t = float(self._guess(s))
        for _ in range(4):
            residual = self._s[k] + _quad(
                lambda u: 1.0 / self._f1(u), self._t[k], t
            )
            step = (residual - s) * self._f1(t)
            t -= step
            if abs(step) < 1e-15 * (1.0 + abs(t)):
                break
        return t

    def __call__(self, s: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self._s - s)))
        t = self.t_of(s)
        f, fp = self._fcurve.value(t)
        h1 = self._h1[k] + 0.5 * _quad(self._f1, self._t[k], t)
        return h_vector_from_f(np.asarray(f), np.asarray(fp), h1)


def to_h(fcurve: FCurve, t_o: float) -> SolutionCurve:
    """Convert an f-curve with f1 < 0 to the h-variables.

    s(t) = int_{t_o}^t du/f1 and h1 = (1/2) int_{t_o}^t f1 du, both by
    adaptive quadrature at QUAD_TOL; the nodes come out ordered by
    increasing s.

    Raises:
        DomainError: If f1 >= 0 at a node or t_o lies outside the grid.
    """
    if np.any(fcurve.f[:, 0] >= 0):
        raise DomainError("to_h needs f1 < 0 on the whole sample range")
    if not fcurve.t[0] <= t_o <= fcurve.t[-1]:
        raise DomainError(f"t_o={t_o} outside [{fcurve.t[0]}, {fcurve.t[-1]}]")

    def f1(u: float) -> float:
        return float(fcurve.value(u)[0][0])

    s_nodes = np.array([_quad(lambda u: 1.0 / f1(u), t_o, t) for t in fcurve.t])
    h1_nodes = np.array([0.5 * _quad(f1, t_o, t) for t in fcurve.t])
    states = np.array(
        [
            h_vector_from_f(fcurve.f[k], fcurve.fp[k], h1_nodes[k])
            for k in range(len(fcurve))
        ]
    )
    # f1 < 0, so s decreases along t
    order = np.argsort(s_nodes)
    s_nodes, t_nodes = s_nodes[order], fcurve.t[order]
    h1_nodes, states = h1_nodes[order], states[order]
    integrals = first_integrals_array(states, fcurve.mu)
    phase = math.atan2(fcurve.f[0, 4], fcurve.f[0, 3])
    return SolutionCurve(
        grid=s_nodes,
        states=states,
        mu=fcurve.mu,
        integrals=integrals,
        drift=np.max(np.abs(integrals - integrals[0]), axis=0),
        meta={"t_o": t_o, "t": t_nodes.tolist(), "phase": phase},
        interpolant=_ReparametrizedCurve(fcurve, s_nodes, t_nodes, h1_nodes),
    )


def _t_nodes(hcurve: SolutionCurve, t_o: float, s_o: float) -> np.ndarray:
    grid = hcurve.grid
    if hcurve.interpolant is not None:

        def f1(s: float) -> float:
            return -math.sqrt(2.0 * hcurve(s)[4])

        start = int(np.argmin(np.abs(grid - s_o)))
        t = np.empty_like(grid)
        t[start] = t_o + _quad(f1, s_o, grid[start])
        for k in range(start + 1, len(grid)):
            t[k] = t[k - 1] + _quad(f1, grid[k - 1], grid[k])
        for k in range(start - 1, -1, -1):
            t[k] = t[k + 1] + _quad(f1, grid[k + 1], grid[k])
        return t
    order = np.argsort(grid)
    spline = CubicSpline(
        grid[order], -np.sqrt(2.0 * hcurve.states[order, 4])
    ).antiderivative()
    return t_o + spline(grid) - spline(s_o)


def _f1_derivatives(hcurve: SolutionCurve, f1: np.ndarray) -> np.ndarray:
    b1p = np.empty(len(hcurve))
    fallback = np.gradient(hcurve.states[:, 4], hcurve.grid)
    for k in range(len(hcurve)):
        try:
            b1p[k] = h_rhs(hcurve.hstate(k))[4]
        except SingularityError:
            b1p[k] = fallback[k]
    return b1p / f1**2


def from_h(
    hcurve: SolutionCurve,
    t_o: float = 0.0,
    s_o: float | None = None,
    phase: float | None = None,
) -> FCurve:
    """Invert the change of variables.

    f1 = -sqrt(2 h1'), f2 = (h2 + h3)/2, f3 = (h2 - h3)/2 and
    frak = h4/2 split along the constant phase; t is recovered from
    dt/ds = f1 with t(s_o) = t_o, and f1' from the h-system.

    Args:
        hcurve: h-solution with b1 > 0 at every node
        t_o: t-value assigned to s_o
        s_o: Base point, defaults to 0 when inside the grid
        phase: Phase of (f4, f5), defaults to the curve's recorded
            phase or pi/2

    Raises:
        DomainError: If b1 <= 0 at a node.
    """
    states = hcurve.states
    if np.any(states[:, 4] <= 0):
        raise DomainError("from_h needs h1' > 0 on the whole range")
    lo, hi = float(hcurve.grid.min()), float(hcurve.grid.max())
    if s_o is None:
        s_o = 0.0 if lo <= 0.0 <= hi else float(hcurve.grid[0])
    if not lo <= s_o <= hi:
        raise DomainError(f"s_o={s_o} outside [{lo}, {hi}]")
    if phase is None:
        phase = float(hcurve.meta.get("phase", math.pi / 2))
    t = _t_nodes(hcurve, t_o, s_o)

    f1 = -np.sqrt(2.0 * states[:, 4])
    frak = states[:, 3] / 2
    frak_p = states[:, 7] / (2 * f1)
    cos, sin = (
        0.0 if abs(v) < 1e-15 else v for v in (math.cos(phase), math.sin(phase))
    )
    f = np.column_stack(
        [
            f1,
            (states[:, 1] + states[:, 2]) / 2,
            (states[:, 1] - states[:, 2]) / 2,
            frak * cos,
            frak * sin,
        ]
    )
    fp = np.column_stack(
        [
            _f1_derivatives(hcurve, f1),
            (states[:, 5] + states[:, 6]) / (2 * f1),
            (states[:, 5] - states[:, 6]) / (2 * f1),
            frak_p * cos,
            frak_p * sin,
        ]
    )
    order = np.argsort(t)
    return FCurve(
        t=t[order],
        f=f[order],
        fp=fp[order],
        mu=hcurve.mu,
        meta={"s": hcurve.grid[order].tolist(), "phase": phase},
    )


# =============================================================================
# Constraint variety N
# =============================================================================


def _integrals7(point: np.ndarray, mu: float) -> np.ndarray:
    return _integrals(np.concatenate([[0.0], point[:3]]), point[3:], mu)


def integrals_jacobian(point: Sequence[float], mu: float) -> np.ndarray:
    """d I / d(a2, a3, a4, b1, b2, b3, b4) at a point with a1 = 0."""
    a2, a3, a4, b1, b2, b3, b4 = np.asarray(point, dtype=float)
    den = a2**2 - a3**2 - a4**2
    return np.array(
        [
            [24 * mu * a2, -24 * mu * a3, -24 * mu * a4, 1, 0, 1, 0],
            [
                0,
                0,
                8 * a4,
                -2 * b1 - 2 * b3,
                2 * b2,
                -2 * b3 - 2 * b1,
                -2 * b4,
            ],
            [b2, -b3 - b1, -b4, -a3, a2, -a3, -a4],
            [
                9 * mu * b1 * a2,
                -9 * mu * b1 * a3,
                -9 * mu * b1 * a4 + 2 * a4,
                9 * mu / 2 * den,
                0,
                0,
                0,
            ],
        ],
        dtype=float,
    )


def project_to_variety(
    point: Sequence[float], mu: float, tol: float = 1e-12
) -> np.ndarray:
    """Nearby point of R^7 with all four first integrals below tol.

    A trust-region least-squares solve is followed by minimum-norm
    Newton corrections.

    Raises:
        MembershipError: If the projection does not reach tol.
    """
    x0 = np.asarray(point, dtype=float)
    result = least_squares(
        _integrals7,
        x0,
        jac=integrals_jacobian,
        args=(mu,),
        method="trf",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    x = result.x
    for _ in range(8):
        residual = _integrals7(x, mu)
        if np.max(np.abs(residual)) < tol:
            break
        step, *_ = np.linalg.lstsq(integrals_jacobian(x, mu), residual, rcond=None)
        x = x - step
    residual = np.abs(_integrals7(x, mu))
    if residual.max() >= tol:
        raise MembershipError(
            f"projection onto N stalled at |I| = {residual.max():.3e}",
            integrals=residual.tolist(),
        )
    logger.debug("Projected onto N, moved by %.3e", np.max(np.abs(x - x0)))
    return x


def perturb_in_variety(
    base: Sequence[float],
    mu: float,
    scale: float,
    rng: np.random.Generator,
    tol: float = 1e-12,
) -> np.ndarray:
    """Seeded random perturbation of a point of N, projected back onto N."""
    base = np.asarray(base, dtype=float)
    return project_to_variety(
        base + scale * rng.standard_normal(base.shape), mu, tol
    )


class _TwoSidedCurve:
    def __init__(self, back: SolutionCurve, forward: SolutionCurve):
        self._back = back
        self._forward = forward

    def __call__(self, s: float) -> np.ndarray:
        return self._back(s) if s < 0 else self._forward(s)


def integrate_span(
    x0: HState,
    span: tuple[float, float],
    tol: float | None = None,
    n_points: int = DEFAULT_POINTS,
) -> SolutionCurve:
    """Integrate from x0 at s = 0 over a span containing 0.

    Spans with an endpoint at 0 are integrated in one direction; otherwise
    the backward and forward halves are joined at s = 0.
    """
    s0, s1 = float(span[0]), float(span[1])
    if not s0 <= 0.0 <= s1 or s0 == s1:
        raise DomainError(f"span ({s0}, {s1}) must contain s = 0")
    x0 = HState(s=0.0, a=x0.a, b=x0.b, mu=x0.mu)
    if s0 == 0.0:
        return integrate(x0, (0.0, s1), tol, n_points)
    if s1 == 0.0:
        back = integrate(x0, (0.0, s0), tol, n_points)
        return SolutionCurve(
            grid=back.grid[::-1],
            states=back.states[::-1],
            mu=back.mu,
            integrals=back.integrals[::-1],
            drift=back.drift,
            meta=back.meta,
            interpolant=back.interpolant,
        )
    half = max(2, n_points // 2 + 1)
    back = integrate(x0, (0.0, s0), tol, half)
    forward = integrate(x0, (0.0, s1), tol, half)
    return SolutionCurve(
        grid=np.concatenate([back.grid[::-1], forward.grid[1:]]),
        states=np.vstack([back.states[::-1], forward.states[1:]]),
        mu=x0.mu,
        integrals=np.vstack([back.integrals[::-1], forward.integrals[1:]]),
        drift=np.maximum(back.drift, forward.drift),
        meta={
            **forward.meta,
            "steps": back.meta["steps"] + forward.meta["steps"],
            "nfev": back.meta["nfev"] + forward.meta["nfev"],
        },
        interpolant=_TwoSidedCurve(back, forward),
    )
