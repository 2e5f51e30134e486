"""Truncated power series in s.

TaylorSeries holds scalar coefficients c_0..c_order, TaylorJet4 a
4-vector of them. Products and reciprocals drop every term above the
truncation order.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from nearly_kahler.errors import SeriesError


@dataclass(frozen=True, eq=False)
class TaylorSeries:
    """Scalar series sum_k coeffs[k] s^k truncated at len(coeffs) - 1."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise SeriesError("series needs a non-empty coefficient vector")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def constant(cls, value: float, order: int) -> "TaylorSeries":
        coeffs = np.zeros(order + 1)
        coeffs[0] = value
        return cls(coeffs)

    @classmethod
    def variable(cls, order: int) -> "TaylorSeries":
        """The series of s itself."""
        coeffs = np.zeros(order + 1)
        if order >= 1:
            coeffs[1] = 1.0
        return cls(coeffs)

    def _coerce(self, other) -> "TaylorSeries":
        if isinstance(other, TaylorSeries):
            if other.order != self.order:
                raise SeriesError(
                    f"order mismatch: {self.order} vs {other.order}"
                )
            return other
        return TaylorSeries.constant(float(other), self.order)

    def __add__(self, other) -> "TaylorSeries":
        return TaylorSeries(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __sub__(self, other) -> "TaylorSeries":
        return TaylorSeries(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other) -> "TaylorSeries":
        return TaylorSeries(self._coerce(other).coeffs - self.coeffs)

    def __neg__(self) -> "TaylorSeries":
        return TaylorSeries(-self.coeffs)

    def __mul__(self, other) -> "TaylorSeries":
        if not isinstance(other, TaylorSeries):
            return TaylorSeries(self.coeffs * float(other))
        other = self._coerce(other)
        return TaylorSeries(
            np.convolve(self.coeffs, other.coeffs)[: self.order + 1]
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "TaylorSeries":
        """1/a by the recursion b_n = -(sum_{k>=1} a_k b_{n-k}) / a_0.

        Raises:
            SeriesError: If the constant term vanishes.
        """
        a = self.coeffs
        if a[0] == 0.0:
            raise SeriesError("reciprocal of a series with zero constant term")
        b = np.zeros_like(a)
        b[0] = 1.0 / a[0]
        for n in range(1, a.size):
            b[n] = -np.dot(a[1 : n + 1], b[n - 1 :: -1][:n]) / a[0]
        return TaylorSeries(b)

    def __truediv__(self, other) -> "TaylorSeries":
        if not isinstance(other, TaylorSeries):
            return TaylorSeries(self.coeffs / float(other))
        return self * self._coerce(other).reciprocal()

    def derivative(self) -> "TaylorSeries":
        """d/ds, padded with a zero so the order is kept."""
        k = np.arange(1, self.coeffs.size)
        return TaylorSeries(np.append(self.coeffs[1:] * k, 0.0))

    def shift(self, power: int = 1) -> "TaylorSeries":
        """s^power times the series, truncated."""
        coeffs = np.zeros_like(self.coeffs)
        coeffs[power:] = self.coeffs[: self.coeffs.size - power]
        return TaylorSeries(coeffs)

    def __call__(self, s: float) -> float:
        return float(np.polynomial.polynomial.polyval(s, self.coeffs))


@dataclass(frozen=True, eq=False)
class TaylorJet4:
    """Series with 4-vector coefficients, coeffs of shape (order+1, 4)."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[1] != 4:
            raise SeriesError("TaylorJet4 needs coefficients of shape (n, 4)")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def from_components(cls, parts: Sequence[TaylorSeries]) -> "TaylorJet4":
        return cls(np.column_stack([p.coeffs for p in parts]))

    def component(self, i: int) -> TaylorSeries:
        return TaylorSeries(self.coeffs[:, i])

    def components(self) -> tuple[TaylorSeries, ...]:
        return tuple(self.component(i) for i in range(4))

    def __add__(self, other: "TaylorJet4") -> "TaylorJet4":
        return TaylorJet4(self.coeffs + other.coeffs)

    def __sub__(self, other: "TaylorJet4") -> "TaylorJet4":
        return TaylorJet4(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "TaylorJet4":
        return TaylorJet4(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def derivative(self) -> "TaylorJet4":
        k = np.arange(1, self.coeffs.shape[0])[:, None]
        return TaylorJet4(
            np.vstack([self.coeffs[1:] * k, np.zeros((1, 4))])
        )

    def __call__(self, s: float) -> np.ndarray:
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def coefficient(self, k: int) -> np.ndarray:
        """The s^k coefficient, zero above the truncation order."""
        if k > self.order:
            return np.zeros(4)
        return np.array(self.coeffs[k])
