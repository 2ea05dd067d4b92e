"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain (branch cut, negative radius, ...)."""


class PoleError(DomainError):
    """Evaluation lands exactly on a pole of the scattering amplitude."""


class SingularMatrixError(ArithmeticError):
    """A linear solve hit an (effectively) singular matrix."""


class ConvergenceError(RuntimeError):
    """An iterative method exhausted its iteration budget."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ConfigError(ValueError):
    """Bad run configuration (CLI/config-file level)."""
