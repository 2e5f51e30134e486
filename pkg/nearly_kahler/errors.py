"""Exception hierarchy shared by the algebra, ODE and singular layers."""


class NKError(Exception):
    """Base class for every error raised by the toolkit."""


class DegreeError(NKError, ValueError):
    """A form has the wrong degree or a product overflows degree 6."""


class VolumeFormError(NKError, ValueError):
    """The supplied volume form vanishes."""


class ConsistencyError(NKError, ArithmeticError):
    """An identity that must hold up to round-off is violated."""


class NotStableError(NKError, ValueError):
    """A 3-form or jet fails the stability conditions."""

    def __init__(self, message: str, failed: list[str] | None = None):
        super().__init__(message)
        self.failed = failed or []


class DomainError(NKError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(NKError, RuntimeError):
    """The h-system denominator vanished during integration."""

    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


class StiffnessError(NKError, RuntimeError):
    """The integrator could not advance (step-size underflow)."""


class SeriesError(NKError, ArithmeticError):
    """Truncated series arithmetic hit a zero constant term."""


class HandoffError(NKError, RuntimeError):
    """Series and integrator disagree on the overlap window."""


class MembershipError(NKError, ValueError):
    """Initial data does not lie on the constraint variety N."""

    def __init__(self, message: str, integrals: list[float] | None = None):
        super().__init__(message)
        self.integrals = integrals or []
