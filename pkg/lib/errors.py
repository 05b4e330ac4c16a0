"""
Exception types raised by the estimation library.

Argument errors also subclass ValueError so callers that only know the
builtin hierarchy still catch them.
"""

from __future__ import annotations


class RndError(Exception):
    """Base class for all library errors."""


class KernelError(RndError, ValueError):
    """Dimension mismatch, non-finite input or out-of-domain point."""


class SampleError(RndError, ValueError):
    """A sample could not be read or is empty/malformed."""


class FactorizationError(RndError, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(RndError, ArithmeticError):
    """An iterative routine did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class SingularMatrixError(RndError, ArithmeticError):
    """Matrix is singular within the pivot tolerance."""


class PlanError(RndError, ValueError):
    """Subsample plan is inconsistent with the sample sizes."""


class BracketError(RndError, ArithmeticError):
    """Root-finding interval does not bracket a sign change."""


class ConfigError(RndError, ValueError):
    """Run configuration failed validation."""

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = errors or []


class ModelFormatError(RndError, ValueError):
    """Persisted model document is malformed or has the wrong version."""
