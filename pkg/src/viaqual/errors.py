"""Exception types shared across the toolkit."""


class ViaqualError(ValueError):
    """Base class for all domain errors raised by this package."""


class TouchstoneError(ViaqualError):
    """Malformed Touchstone content; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GridMismatchError(ViaqualError):
    """Two networks were combined without sharing a frequency grid."""


class GeometryError(ViaqualError):
    """A via geometry is physically inconsistent."""


class BandwidthError(ViaqualError):
    """A network's frequency grid is too narrow for the requested analysis."""
