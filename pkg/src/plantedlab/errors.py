"""Shared exception types.

Guard violations (instance space, matrix dimension, enumeration caps) raise
GuardExceeded; models without a tractable density raise IntractableModel;
iterative solvers that hit their iteration caps raise ConvergenceError with
the final residuals attached.
"""

from __future__ import annotations


class PlantedLabError(Exception):
    """Base class for all package errors."""


class GuardExceeded(PlantedLabError):
    """A size/enumeration guard was violated (maps to CLI exit code 2)."""


class IntractableModel(PlantedLabError):
    """Requested an exact computation for a model without a tractable path."""


class ZeroDistinguisher(PlantedLabError):
    """The truncated density equals 1; no scalar distinguisher exists."""


class ConvergenceError(PlantedLabError):
    """An iterative solver failed to converge (maps to CLI exit code 3)."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}
