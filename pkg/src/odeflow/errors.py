"""Exception taxonomy shared across the package.

Every failure mode that callers are expected to handle gets its own class so
tests and the CLI can match on type instead of message text.
"""

from __future__ import annotations


class OdeflowError(Exception):
    """Base class for all package errors."""


class InvalidInputError(OdeflowError, ValueError):
    """Malformed argument: bad shape, non-finite values, out-of-range index."""


class IntegrationDivergedError(OdeflowError, RuntimeError):
    """A trajectory produced a non-finite state."""


class TrainingFailedError(OdeflowError, RuntimeError):
    """Training aborted on a non-finite loss or gradient.

    Carries the iteration index at which the divergence was detected.
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class UnsatisfiableConditionError(OdeflowError, RuntimeError):
    """Rejection sampling exceeded its failure budget for a label condition."""


class InsufficientDataError(OdeflowError, ValueError):
    """Not enough examples per class to fit a baseline classifier."""


class DegenerateProjectionError(OdeflowError, ValueError):
    """Conditioning a direction on others left a numerically zero residual."""


class UnsupportedAnalysisError(OdeflowError, TypeError):
    """Requested an affine view of a field that has no affine form."""


class ZeroMatrixError(OdeflowError, ValueError):
    """Spectral entropy of an all-zero matrix is undefined."""


class UndefinedCorrelationError(OdeflowError, ValueError):
    """Rank correlation of a constant sequence is undefined."""


class UndefinedMetricError(OdeflowError, ValueError):
    """A metric was requested outside its domain (e.g. negative time)."""


class ConfigError(OdeflowError, ValueError):
    """Config file rejected.  Message includes a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointFormatError(OdeflowError, ValueError):
    """Checkpoint file rejected: bad header, version, or parameter count."""
