"""Curve containers for the f- and h-systems.
Uses numpy for storage and scipy Hermite interpolation between samples.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from nearly_kahler.algebra.invariant_frame import FJet
from nearly_kahler.errors import DomainError

logger = logging.getLogger(__name__)

CSV_HEADER = "s,h1,h2,h3,h4,h1p,h2p,h3p,h4p,I1,I2,I3,I4"
POINT_LABELS = ("a2", "a3", "a4", "b1", "b2", "b3", "b4")


def _frozen(values: Any, shape: tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != shape:
        raise DomainError(f"{name} has shape {array.shape}, expected {shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HState:
    """A point (h_i(s), h_i'(s)) of the h-system."""

    s: float
    a: np.ndarray
    b: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, (4,), "a"))
        object.__setattr__(self, "b", _frozen(self.b, (4,), "b"))
        if self.mu <= 0:
            raise DomainError(f"mu must be positive, got {self.mu}")

    @property
    def vector(self) -> np.ndarray:
        """(a1..a4, b1..b4)."""
        return np.concatenate([self.a, self.b])

    @property
    def point7(self) -> np.ndarray:
        """(a2, a3, a4, b1, b2, b3, b4); a1 is fixed to 0 on N."""
        return np.concatenate([self.a[1:], self.b])

    @classmethod
    def from_vector(cls, s: float, vector, mu: float) -> "HState":
        vector = np.asarray(vector, dtype=float)
        return cls(s=s, a=vector[:4], b=vector[4:], mu=mu)

    @classmethod
    def from_point7(
        cls, point, mu: float, s: float = 0.0, a1: float = 0.0
    ) -> "HState":
        point = _frozen(point, (7,), "point")
        return cls(
            s=s, a=np.concatenate([[a1], point[:3]]), b=point[3:], mu=mu
        )


@dataclass(frozen=True, eq=False)
class FCurve:
    """Sampled solution (f, f') of the f-system on an increasing t-grid.

    ``interpolant`` maps t to (f, f'); when absent a cubic Hermite spline
    through the samples is used.
    """

    t: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    mu: float = 1.0
    interpolant: Callable[[float], tuple[np.ndarray, np.ndarray]] | None = (
        None
    )
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        n = t.shape[0]
        if t.ndim != 1 or n < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("FCurve.t must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", _frozen(self.f, (n, 5), "f"))
        object.__setattr__(self, "fp", _frozen(self.fp, (n, 5), "fp"))

    def __len__(self) -> int:
        return self.t.shape[0]

    def jet(self, i: int) -> FJet:
        return FJet(t=float(self.t[i]), f=self.f[i], fp=self.fp[i], mu=self.mu)

    def value(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(f(t), f'(t)) from the interpolant or the Hermite spline."""
        if self.interpolant is not None:
            return self.interpolant(t)
        return self._spline(t), self._spline.derivative()(t)

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.t, self.f, self.fp, axis=0)


@dataclass(frozen=True, eq=False)
class SolutionCurve:
    """Sampled h-solution with first-integral monitoring.

    Attributes:
        grid: Strictly monotone s-values
        states: (n, 8) array of (a, b) per node
        mu: System constant
        integrals: (n, 4) first integrals per node
        drift: Drift from the start value, max_k |I(s_k) - I(s_0)| per
            integral, also over the accepted steps when the integrator
            supplies them. Equals integral_max when the start lies on N.
        meta: Solver statistics
        interpolant: Dense output s -> 8-vector, if available
    """

    grid: np.ndarray
    states: np.ndarray
    mu: float
    integrals: np.ndarray
    drift: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    interpolant: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        n = grid.shape[0]
        steps = np.diff(grid)
        if grid.ndim != 1 or n < 2:
            raise DomainError("SolutionCurve needs at least two nodes")
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError("SolutionCurve grid must be strictly monotone")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", _frozen(self.states, (n, 8), "states"))
        object.__setattr__(
            self, "integrals", _frozen(self.integrals, (n, 4), "integrals")
        )
        drift = _frozen(self.drift, (4,), "drift")
        if not np.all(np.isfinite(drift)):
            raise DomainError("first-integral drift is not finite")
        object.__setattr__(self, "drift", drift)

    def __len__(self) -> int:
        return self.grid.shape[0]

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))

    @property
    def integral_max(self) -> np.ndarray:
        """Absolute size max_k |I(s_k)| per integral over the grid."""
        return np.max(np.abs(self.integrals), axis=0)

    def hstate(self, i: int) -> HState:
        return HState.from_vector(float(self.grid[i]), self.states[i], self.mu)

    def __call__(self, s: float) -> np.ndarray:
        """State vector at s from the dense output."""
        if self.interpolant is None:
            raise DomainError("curve carries no dense output")
        return np.asarray(self.interpolant(s), dtype=float)

    def points7(self) -> np.ndarray:
        """(n, 7) array of (a2, a3, a4, b1, b2, b3, b4)."""
        return np.delete(self.states, 0, axis=1)

    def write_csv(self, path: str | Path) -> Path:
        """Write one row per node with 17 significant digits.

        Args:
            path: Destination file; parent directories are created

        Returns:
            The written path
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table = np.column_stack([self.grid, self.states, self.integrals])
        np.savetxt(
            path,
            table,
            fmt="%.17g",
            delimiter=",",
            header=CSV_HEADER,
            comments="",
        )
        logger.debug("Wrote %d rows to %s", len(self), path)
        return path


def read_csv(path: str | Path) -> np.ndarray:
    """Load a curve table written by ``SolutionCurve.write_csv``."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
