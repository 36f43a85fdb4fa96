"""Exception hierarchy shared by all qnes modules."""


class QnesError(Exception):
    """Base class for every error raised by qnes."""


class InvalidInstanceError(QnesError, ValueError):
    pass


class DimensionError(QnesError, ValueError):
    pass


class SizeLimitError(QnesError, ValueError):
    pass


class NumericError(QnesError, ArithmeticError):
    pass


class DegenerateStateError(QnesError, ValueError):
    """Raised when a state has zero norm or no admissible configuration."""


class InsufficientSamplesError(QnesError, ValueError):
    pass


class NormalizationError(QnesError, ValueError):
    pass


class SingularMetricError(QnesError, ArithmeticError):
    """Raised when the regularized metric solve produces non-finite output.

    ``diagnostics`` holds what was known about the system at failure
    (dimension, shift, eigenvalue extremes when they could be computed).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(QnesError, ValueError):
    pass


class SolverError(QnesError, RuntimeError):
    pass
