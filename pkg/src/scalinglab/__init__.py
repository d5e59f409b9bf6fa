"""Scaling limits of free and generalized free scalar field correlators."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericalError, QuadratureError  # noqa: E402

__all__ = ["ConfigError", "DomainError", "NumericalError", "QuadratureError", "__version__"]
