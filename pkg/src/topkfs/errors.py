"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised for malformed inputs: bad shapes, non-finite data, out-of-range indices."""


class NumericalError(ArithmeticError):
    """Raised when an optimizer produces a non-finite objective.

    ``step`` holds the iteration (linear solvers) or epoch (networks) at which
    the failure was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(ValueError):
    """Raised for unknown, missing or unparsable experiment settings."""
