"""Exception types raised across the package."""


class SelfSimError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(SelfSimError, ValueError):
    """A distribution or model parameter is outside its valid domain."""


class InsufficientDataError(SelfSimError, ValueError):
    """Too few packets, bins or blocks for the requested operation."""


class DegenerateSeriesError(SelfSimError, ValueError):
    """The series has zero variance."""


class SingularFitError(SelfSimError, ValueError):
    """Least-squares fit is undetermined (all abscissae equal)."""


class InfeasibleTargetError(SelfSimError, ValueError):
    """The target rate cannot be reached with the given source count and gap."""


class OutOfRangeError(SelfSimError, ValueError):
    """A shape parameter lies outside its feasible interval.

    ``bound`` names the violated side: ``"lower"`` or ``"upper"``.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class NonConvergenceError(SelfSimError, RuntimeError):
    """Calibration ran out of iterations; ``history`` holds every trial."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class TraceFormatError(SelfSimError, ValueError):
    """A trace or config file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TraceValidationError(SelfSimError, ValueError):
    """A parsed trace violates an ordering or size constraint."""
