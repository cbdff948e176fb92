"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (parse errors carry line numbers)."""


class NumericGuardError(RuntimeError):
    """A runtime guard tripped: blow-up, loss of positivity, or a failed sanity check."""


class ConvergenceError(NumericGuardError):
    """An iteration did not reach its tolerance within the allowed sweeps."""

    def __init__(self, message, distances=()):
        super().__init__(message)
        self.distances = tuple(float(x) for x in distances)


class BracketError(ValueError):
    """A sign-change search was started on endpoints with the same sign."""
