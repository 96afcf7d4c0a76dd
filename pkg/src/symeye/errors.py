"""Exception hierarchy shared across the package."""


class SymeyeError(Exception):
    """Base class for all package errors."""


class ParameterError(SymeyeError, ValueError):
    """An argument is outside its documented domain."""


class DataError(SymeyeError, ValueError):
    """Input data violates a structural invariant (bad annotation, empty grid, ...)."""


class NoEyeFound(SymeyeError):
    """No |I20| maximum passed the angle test."""


class FlatImage(SymeyeError):
    """Every pixel has local variance below the validity floor."""


class DegenerateCalibration(SymeyeError):
    """The width polynomial could not be fitted."""


class ZeroVector(SymeyeError, ValueError):
    """A vector that must be normalised to a PDF sums to zero."""


class EmptyOverlap(SymeyeError):
    """Two iris codes share no jointly valid bits."""


class ManifestError(DataError):
    """A manifest file could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
