"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so each class carries one.
"""


class GlobalPropError(Exception):
    exit_code = 4


class ConfigurationError(GlobalPropError, ValueError):
    """Invalid parameters, malformed config files or incompatible grids."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(GlobalPropError, ArithmeticError):
    """A computation produced an unusable result (singular system, breakdown)."""

    exit_code = 4


class GridError(NumericalError):
    """Eigenvectors not decayed at the radial boundaries."""


class SingularityError(NumericalError):
    """A denominator of an approximate update vanished."""


class ModelSpaceBreakdown(NumericalError):
    """The initial-state amplitude vanished so the wave operator is undefined."""


class DegenerateInputError(NumericalError):
    pass


class DivergenceError(GlobalPropError):
    """The iterative series left its radius of convergence.

    ``history`` holds the iteration reports gathered before the failure.
    """

    exit_code = 3

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
