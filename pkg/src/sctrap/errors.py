"""Exception hierarchy shared by all modules.

``DomainError`` subclasses map to CLI exit code 1, ``ConfigError`` to 2.
"""


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(ToolkitError):
    """A physically or numerically meaningful failure (no trap, no fit, ...)."""


class ConfigError(ToolkitError):
    """Invalid user input: bad configuration, missing electrode values, etc."""


class InvalidGeometryError(ConfigError):
    pass


class BudgetExceededError(DomainError):
    def __init__(self, message, required_nodes):
        super().__init__(message)
        self.required_nodes = required_nodes


class ConvergenceError(DomainError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvalidCornerError(ConfigError):
    pass


class InvalidProbeError(ConfigError):
    pass


class InvalidLoopError(ConfigError):
    pass


class FieldKindError(ConfigError, TypeError):
    """A field map of the wrong kind was passed to an operation."""


class AlignmentError(ConfigError):
    """Two maps or trajectories do not share a grid."""


class NoTrapError(DomainError):
    pass


class SaddleError(DomainError):
    pass


class NoResonanceError(DomainError):
    pass


class FitFailureError(DomainError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OptimizationError(DomainError):
    pass


class IntegratorError(DomainError):
    pass


class UnitError(ConfigError):
    pass
