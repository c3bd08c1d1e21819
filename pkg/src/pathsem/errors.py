"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PathsemError(Exception):
    """Base class for all package-specific errors."""


class ModelSpecError(PathsemError):
    """Raised when a plain-text model specification cannot be parsed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class RankDeficiencyError(PathsemError):
    """Raised when a regression design matrix is rank deficient.

    Callers treat this as a non-converged fit rather than a hard failure.
    """


class NotPositiveDefiniteError(PathsemError):
    """Raised when a covariance matrix required to be positive definite is not."""
