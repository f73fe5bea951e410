"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative procedure stopped before meeting its tolerance.

    ``residual`` holds the last value of the monitored quantity and
    ``trace`` whatever history the caller recorded (may be empty).
    """

    def __init__(self, message, residual=float("nan"), trace=()):
        super().__init__(message)
        self.residual = residual
        self.trace = list(trace)


class PlanningError(ValueError):
    """No level/sample-size plan satisfies the requested accuracy."""


class StreamExhausted(RuntimeError):
    """A finite noise stream ran out of draws."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
