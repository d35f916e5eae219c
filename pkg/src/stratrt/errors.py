"""Exception types raised by the solvers."""


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to converge.

    ``diagnostics`` is a plain dict with whatever the failing routine knew
    (worst node, last residual, bracket ...).
    """

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            message = f"{message} ({', '.join(f'{k}={v}' for k, v in diagnostics.items())})"
        super().__init__(message)
