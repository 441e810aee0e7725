"""Exception types shared across the package."""

from __future__ import annotations


class TrajlindError(Exception):
    """Base class for all errors raised by trajlind."""


class ShapeError(TrajlindError, ValueError):
    """Matrix or superoperator shapes are incompatible."""


class InvalidInputError(TrajlindError, ValueError):
    """Input violates a documented precondition (non-finite, non-unitary, ...)."""


class DomainError(TrajlindError, ValueError):
    """A scalar parameter lies outside the domain where the operation is defined."""


class ConstraintViolation(TrajlindError):
    """The Lindbladian has no jump set with sum L^dag L proportional to identity."""


class NumericalFailure(TrajlindError, RuntimeError):
    """An iterative or sampling procedure failed to terminate within its cap."""
