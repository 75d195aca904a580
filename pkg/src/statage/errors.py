"""Exception hierarchy shared by all statage modules."""


class StatageError(Exception):
    """Base class for all library errors."""


class DomainError(StatageError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ExponentOverflowError(DomainError):
    """An exponent left the representable log range."""


class BracketError(StatageError):
    """Root bracket does not contain a sign change."""

    def __init__(self, lo, hi, f_lo, f_hi):
        self.lo, self.hi, self.f_lo, self.f_hi = lo, hi, f_lo, f_hi
        super().__init__(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )


class FeasibilityError(StatageError):
    """Problem constraints cannot be satisfied by any policy."""


class ConvergenceError(StatageError):
    """Iteration failed to converge within its budget."""

    def __init__(self, message, trace=None):
        self.trace = list(trace) if trace is not None else []
        super().__init__(message)


class ConfigError(StatageError, ValueError):
    """Invalid or malformed configuration input."""
