"""Exception hierarchy shared by every module."""


class DiracKGError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DiracKGError, ValueError):
    """Invalid parameters: odd grid size, p <= 3, unknown config keys..."""


class UsageError(DiracKGError, ValueError):
    """Operation called on data in the wrong representation or shape."""


class DomainError(DiracKGError, ValueError):
    """Argument outside the mathematical domain (e.g. |v| >= 1, x = 0)."""


class NumericError(DiracKGError, ArithmeticError):
    """A multiplier or field produced NaN/Inf."""


class RangeError(DiracKGError, ValueError):
    """Requested time lies outside the sampled horizon."""


class DivergenceError(DiracKGError, RuntimeError):
    """Picard iteration blew up or stopped contracting."""

    def __init__(self, message, node=None, ratios=None):
        super().__init__(message)
        self.node = node
        self.ratios = list(ratios or [])


class GateError(DiracKGError):
    """A theorem hypothesis (smallness, admissibility, horizon) is violated."""

    def __init__(self, message, violated=(), report=None):
        super().__init__(message)
        self.violated = list(violated)
        self.report = report


class BallViolationError(DiracKGError):
    """The nucleus Picard map left the ball B."""

    def __init__(self, message, constraint, time=None, report=None):
        super().__init__(message)
        self.constraint = constraint
        self.time = time
        self.report = report


class DataError(DiracKGError, ValueError):
    """Input data unusable for a fit (too few samples, nonpositive values)."""
