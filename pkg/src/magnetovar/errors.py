"""Exception types shared across the package."""


class MagnetovarError(Exception):
    """Base class for all package errors."""


class GridError(MagnetovarError):
    """Invalid grid, geometry, or field layout."""


class SupportError(MagnetovarError):
    """A field is nonzero where its contract requires zero (padding, mask)."""


class ConvergenceError(MagnetovarError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(MagnetovarError):
    """Malformed run configuration."""
