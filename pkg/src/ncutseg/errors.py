"""Exception types shared across the pipeline.

Each class maps to a process exit code so the CLI can report failures
uniformly: ConfigError -> 2, DataError -> 3, NumericalError -> 4.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(ValueError):
    """Malformed or missing input data (files, arrays, labels)."""

    exit_code = 3


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its convergence contract."""

    exit_code = 4


class ConvergenceError(NumericalError):
    """Eigensolver did not reach the requested residual tolerance.

    Carries the best residual seen so callers can report diagnostics.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual
