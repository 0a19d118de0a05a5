"""Exception hierarchy shared by every module."""


class VarqError(Exception):
    """Base class for all errors raised by varq."""


class DomainError(VarqError, ValueError):
    """A parameter lies outside the domain of the operation (q < 1, t <= 0, ...)."""


class SizeError(VarqError, ValueError):
    """An input exceeds a hard size guard (enumeration or multi-index blowup)."""


class SpaceMismatchError(VarqError, ValueError):
    """Two points or functions live in different spaces."""


class SingularityError(VarqError, ValueError):
    """Evaluation requested at a point where the quantity diverges."""


class DegenerateInputError(VarqError, ValueError):
    """Input makes a ratio or normalisation meaningless (e.g. zero martingale)."""


class QuadratureError(VarqError, RuntimeError):
    """Adaptive quadrature exhausted its subdivision budget.

    The best available estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ResolutionError(VarqError, RuntimeError):
    """Two grid resolutions disagree by more than the configured gate."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class PrecisionError(VarqError, RuntimeError):
    """A certified search ran out of floating point room."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class TailNotStableError(QuadratureError):
    """Cutoff doubling over a half line never settled; the integral looks divergent."""
