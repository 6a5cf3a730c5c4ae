"""Exception types raised across the package.

Each class maps onto one CLI exit code (see ``sweepcoal.cli``).
"""
from __future__ import annotations


class SweepCoalError(Exception):
    """Base class for all package errors."""


class DomainError(SweepCoalError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(SweepCoalError, ValueError):
    """Two objects of incompatible size were combined."""


class SizeLimitError(SweepCoalError, ValueError):
    """A brute-force routine was asked for more than it is built to handle."""


class ValidationError(SweepCoalError, ValueError):
    """An input document or parameter set failed validation.

    ``field`` names the offending field, so messages can point at it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ResourceError(SweepCoalError, RuntimeError):
    """A request would exceed the memory or work budget."""


class UnsupportedMeasureError(SweepCoalError, ValueError):
    """The measure lies outside the family a routine supports."""


class DivergenceError(SweepCoalError, ValueError):
    """A series required by the computation does not converge."""


class IncompleteTreeError(SweepCoalError, ValueError):
    """Statistics were requested for a genealogy that never reached its root."""


class DegenerateMarkError(SweepCoalError, ValueError):
    """A sweep atom yields fewer than one stick-breaking fragment."""
