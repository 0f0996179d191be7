class GapSpecError(Exception):
    """Base class for errors raised by gapspec."""


class ValidationError(GapSpecError, ValueError):
    """Invalid input: shapes, symmetry, quantum numbers, config keys."""


class PreconditionError(ValidationError):
    """An operation was called outside its domain (e.g. lambda <= a_minus)."""


class ConvergenceError(GapSpecError, RuntimeError):
    """The bracketed root-find did not converge.

    ``bracket`` holds the last (lo, hi) interval.
    """

    def __init__(self, message: str, bracket: tuple[float, float] | None = None, tau: float | None = None):
        super().__init__(message)
        self.bracket = bracket
        self.tau = tau
