"""Exception hierarchy shared by every module."""


class FinprecError(Exception):
    """Base class for all package errors."""


class DimensionError(FinprecError, ValueError):
    """Array shapes do not agree."""


class DomainError(FinprecError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class ConfigError(FinprecError, ValueError):
    """Invalid user configuration."""


class CapacityError(FinprecError, ValueError):
    """An enumeration or integer exceeds its configured cap."""


class ConvergenceError(FinprecError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
