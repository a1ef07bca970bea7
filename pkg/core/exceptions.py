#
# core/exceptions.py
#


class TrajForgeError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class ProjectionDomainError(TrajForgeError, ValueError):
    """Latitude at or beyond a pole, or ellipsoid parameters out of range."""


class CsvFormatError(TrajForgeError, ValueError):
    """A malformed or out-of-range AIS row. Line numbers are 1-based, header included."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyTrajectorySetError(TrajForgeError, ValueError):
    pass


class KernelSpecError(TrajForgeError, ValueError):
    pass


class GridSpecError(TrajForgeError, ValueError):
    pass


class MetricInputError(TrajForgeError, ValueError):
    pass


class InvariantViolation(TrajForgeError, AssertionError):
    """Raised when an internal invariant breaks. Always an implementation bug, never bad data."""
