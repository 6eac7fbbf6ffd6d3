class CapacityBoundsError(Exception):
    """Base class for every error raised by the capacity-bounds package."""


class ValidationError(CapacityBoundsError, ValueError):
    """Raised when an input violates a precondition (CLI exit code 2)."""


class ConvergenceError(CapacityBoundsError, RuntimeError):
    """Raised when an iterative numerical method fails to converge (CLI exit code 3)."""
