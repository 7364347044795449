"""Exception types shared across the package."""


class PqrError(Exception):
    """Base class for errors raised by pqrlearn."""


class ParseError(PqrError, ValueError):
    """A data line could not be parsed as a labeled LIBSVM instance.

    Carries the offending line number (1-based) and source path when the
    failure happened inside a file stream.
    """

    def __init__(self, message, line_no=None, path=None):
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where += f" in {path}"
        if line_no is not None:
            where += f" at line {line_no}"
        super().__init__(message + where)


class NumericError(PqrError, ArithmeticError):
    """A non-finite value surfaced during training."""

    def __init__(self, message, round_index=None, slot=None):
        self.round_index = round_index
        self.slot = slot
        detail = ""
        if round_index is not None:
            detail += f" (round {round_index}"
            detail += f", slot {slot})" if slot is not None else ")"
        super().__init__(message + detail)


class ConvergenceError(PqrError, RuntimeError):
    """The batch oracle failed to reach its gradient tolerance."""

    def __init__(self, message, gradient_norm=None, iterations=None):
        self.gradient_norm = gradient_norm
        self.iterations = iterations
        detail = ""
        if gradient_norm is not None:
            detail = f" (gradient norm {gradient_norm:.3e} after {iterations} iterations)"
        super().__init__(message + detail)


class UndefinedMetricError(PqrError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
