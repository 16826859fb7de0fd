"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: input/domain/resolution errors are the
caller's fault (exit 2), numeric errors are solver failures (exit 3), and a
consistency error means two independent computations of the same quantity
disagreed (exit 4) and always carries the intermediate data.
"""

from __future__ import annotations


class GeodLabError(Exception):
    """Base class for all package errors."""


class InputError(GeodLabError, ValueError):
    """Malformed or out-of-contract input."""


class DomainError(InputError):
    """Points farther apart than the safe connection radius."""


class ResolutionError(InputError):
    """Polygon resolution too coarse; carries the minimal admissible N."""

    def __init__(self, message: str, min_admissible_n: int):
        super().__init__(message)
        self.min_admissible_n = int(min_admissible_n)


class NumericError(GeodLabError, RuntimeError):
    """An iteration or integration failed to converge."""


class ConsistencyError(GeodLabError, RuntimeError):
    """Two independent routes to the same quantity disagree."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class NumericWarning(UserWarning):
    """Diagnostic warning attached to a numerically suspicious result."""
