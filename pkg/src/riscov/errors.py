"""Exception hierarchy shared across the package."""
from __future__ import annotations


class RiscovError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(RiscovError, ValueError):
    """An argument violates a precondition (non-finite, non-positive, ...)."""


class DomainError(RiscovError, ValueError):
    """A point evaluation was requested outside a function's support."""


class SingularPointError(DomainError):
    """Evaluation exactly on an integrable singularity; use open quadrature rules."""


class EmptyScenarioError(RiscovError, RuntimeError):
    """A point process realization came up empty after the bounded retry budget."""


class NumericalError(RiscovError, RuntimeError):
    """A quadrature failed to reach its requested tolerance.

    Carries the tolerance actually achieved so callers can decide whether the
    value is still usable.
    """

    def __init__(self, message: str, achieved_tolerance: float | None = None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance
