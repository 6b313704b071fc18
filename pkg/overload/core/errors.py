"""Exception hierarchy shared by the numerical kernel, simulator and CLI."""

from typing import Any, Optional


class OverloadError(Exception):
    """Base class for all package errors."""


class SpecValidationError(OverloadError, ValueError):
    """A value violates the invariants of its domain type."""


class DimensionMismatchError(SpecValidationError):
    """Inputs disagree on the number of queues Q."""


class PreconditionError(OverloadError, ValueError):
    """An operation was called outside the domain it is defined on."""


class BudgetExceededError(OverloadError):
    """An exhaustive search would exceed its configured budget."""


class NumericalError(OverloadError):
    """A numerical routine broke down."""


class ConvergenceError(NumericalError):
    """The growth-ray solver hit its iteration ceiling.

    Attributes:
        best: Best iterate found (an ``EtaSolution``)
    """

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best


class GeometryError(OverloadError, AssertionError):
    """Internal geometric consistency check failed."""


class ConfigError(OverloadError):
    """Experiment configuration is unreadable or invalid."""
