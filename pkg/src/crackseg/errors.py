"""Exception types raised across the package."""


class CrackSegError(Exception):
    """Base class for all package errors."""


class ShapeError(CrackSegError, ValueError):
    """Tensor dimensions are inconsistent for an operation."""

    def __init__(self, message: str, axis: int | str | None = None):
        super().__init__(message)
        self.axis = axis


class ConfigError(CrackSegError, ValueError):
    """An architecture or run configuration is invalid."""


class PathError(CrackSegError, ValueError):
    """A scan path or permutation is malformed or mismatched."""


class NumericalError(CrackSegError, ArithmeticError):
    """A value left the numerical domain (NaN/Inf, nonpositive step, ...)."""


class UsageError(CrackSegError, RuntimeError):
    """An API was called in a state where it cannot run."""


class DataError(CrackSegError, OSError):
    """Dataset files are missing, unpaired or unreadable."""
