"""Error types and exit-code classification for the clipscore pipeline."""
from enum import Enum
from typing import Optional


class ClipScoreError(Exception):
    """Base class for every error raised by the pipeline."""


class ShapeError(ClipScoreError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, op: str, message: str):
        """Initialize shape error.

        Args:
            op: Name of the primitive or layer that rejected its operands
            message: Description of the mismatch
        """
        super().__init__(f"{op}: {message}")
        self.op = op


class GeometryError(ClipScoreError):
    """A convolution or pooling geometry admits no output position."""


class ConfigurationError(ClipScoreError):
    """Invalid model, experiment or runtime configuration."""


class InputError(ClipScoreError):
    """Invalid caller-supplied data."""


class SpearmanUndefinedError(InputError):
    """Rank correlation requested for a sequence with zero rank variance."""


class FormatError(ClipScoreError):
    """Malformed AQAT/AQAD/checkpoint bytes."""

    def __init__(self, message: str, offset: int):
        """Initialize format error.

        Args:
            message: What was wrong
            offset: Byte offset at which decoding failed
        """
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NumericalError(ClipScoreError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        """Initialize numerical error.

        Args:
            epoch: 1-based epoch in which the loss diverged
            batch: 1-based batch index within the epoch
            loss: The offending loss value
        """
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class GradientCheckError(ClipScoreError):
    """Analytic gradients disagree with the finite-difference oracle."""

    def __init__(self, op: str, rel_error: float, tolerance: float):
        """Initialize gradient check error.

        Args:
            op: Name of the failing check
            rel_error: Observed maximum relative error
            tolerance: Tolerance it was compared against
        """
        super().__init__(f"gradient check failed for {op}: rel. error {rel_error:.3e} >= {tolerance:.1e}")
        self.op = op
        self.rel_error = rel_error
        self.tolerance = tolerance


class ErrorType(Enum):
    """Classification of error types, one per process exit code."""
    CHECK_FAILURE = 1
    USAGE = 2
    NUMERICAL = 3
    INTERNAL = 4


def classify_error(error: Exception) -> ErrorType:
    """Classify an error to determine how the CLI reports it.

    Args:
        error: The exception to classify

    Returns:
        ErrorType classification
    """
    if isinstance(error, GradientCheckError):
        return ErrorType.CHECK_FAILURE

    if isinstance(error, NumericalError):
        return ErrorType.NUMERICAL

    usage_errors = (
        ConfigurationError, InputError, FormatError, ShapeError, GeometryError,
        FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError,
    )
    if isinstance(error, usage_errors):
        return ErrorType.USAGE

    return ErrorType.INTERNAL


def exit_code_for(error: Optional[Exception]) -> int:
    """Map an exception (or None for success) to the process exit code.

    Internal errors share exit code 1 with check failures; argparse already
    owns exit code 2 for malformed command lines.
    """
    if error is None:
        return 0

    error_type = classify_error(error)
    if error_type == ErrorType.INTERNAL:
        return 1
    return error_type.value
