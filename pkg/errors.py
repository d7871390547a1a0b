"""
Exception types shared by the simulator, the diagnostics and the entry points.

Validation problems derive from ValueError so callers can keep catching the
builtin, the way the service layer does for bad input.
"""
from typing import Optional


class DampedWaveError(Exception):
    """Base class for every error raised by this package"""


class ConfigurationError(DampedWaveError, ValueError):
    """Malformed run configuration or mismatched array shapes"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(DampedWaveError, ValueError):
    """Argument outside the domain an operation is defined on"""


class UnsupportedDomainError(DomainError):
    """Operation requested on a grid kind it does not support"""


class DivergenceError(DampedWaveError, RuntimeError):
    """Trajectory blew up; carries the time and what was recorded before it"""

    def __init__(self, message: str, time: float, partial=None):
        self.time = time
        self.partial = partial
        super().__init__(f"{message} (t={time:.6g})")


class ConvergenceError(DampedWaveError, RuntimeError):
    """Iterative solver stopped without reaching its tolerance"""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message}: residual {residual:.3e} after {iterations} iterations")
