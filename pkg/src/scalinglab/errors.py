"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical procedure produced a non-finite or unreliable result."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class QuadratureError(NumericalError):
    """Quadrature did not reach the requested tolerance after refinement."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
