"""Exceptions and input validation shared across the package."""

import math
import warnings

import numpy as np

PERIOD = 24


class Seq2PeakError(Exception):
    """Base error. ``exit_code`` is what the CLI returns when it escapes."""

    exit_code = 2


class ValidationError(Seq2PeakError, ValueError):
    """Invalid input, configuration or usage; detected before computing."""

    exit_code = 1


class ConfigurationError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class AlignmentError(ValidationError):
    """Phase statistics applied to a window with a different hour-of-day cycle."""


class MalformedInputError(ValidationError):
    pass


class SpacingError(ValidationError):
    pass


class DegenerateSeriesError(ValidationError):
    pass


class FetchError(Seq2PeakError, RuntimeError):
    pass


class IntegrityError(Seq2PeakError, RuntimeError):
    pass


class DivergenceError(Seq2PeakError, RuntimeError):
    """Training loss became NaN or infinite."""

    def __init__(self, epoch, loss):
        super().__init__(f"Training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


def require_multiple_of_period(n, name, error=ConfigurationError):
    """
    Check that a length in hours is a positive multiple of the daily period.

    Args:
        n: Length in hours
        name: Name used in the error message
        error: Exception class to raise

    Returns:
        Number of whole days in ``n``.
    """
    if n <= 0 or n % PERIOD != 0:
        raise error(f"{name}={n} must be a positive multiple of {PERIOD}")
    return n // PERIOD


def validate_alpha(alpha):
    """Check a hybrid-loss weight lies in [0, 1]."""
    if alpha is None or not (0.0 <= float(alpha) <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    return float(alpha)


def validate_ratios(ratios):
    """
    Check train/val/test fractions.

    Raises:
        ConfigurationError: If there are not three positive fractions
            summing to 1 within 1e-9.
    """
    if len(ratios) != 3:
        raise ConfigurationError(f"Expected 3 split ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios):
        raise ConfigurationError(f"Split ratios must be positive, got {tuple(ratios)}")
    if not math.isclose(sum(ratios), 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise ConfigurationError(f"Split ratios must sum to 1, got {sum(ratios)}")
    return tuple(float(r) for r in ratios)


def validate_frame(frame):
    """
    Check a frame is non-empty, finite and hourly, and warn on constant channels.

    Args:
        frame: TimeSeriesFrame to validate

    Raises:
        MalformedInputError: If the frame is empty or holds NaN/Inf.
        SpacingError: If timestamps are not strictly hourly.
    """
    if len(frame) == 0:
        raise MalformedInputError("The series is empty (contains no rows).")

    if not np.all(np.isfinite(frame.values)):
        rows, cols = np.nonzero(~np.isfinite(frame.values))
        raise MalformedInputError(
            f"Non-finite value at row {rows[0]}, column '{frame.channel_names[cols[0]]}'"
        )

    steps = np.diff(frame.timestamps.asi8)
    hour_ns = 3_600_000_000_000
    if len(steps) and np.any(steps != hour_ns):
        bad = int(np.argmax(steps != hour_ns))
        raise SpacingError(
            f"Timestamps must advance by exactly 1 hour; "
            f"{frame.timestamps[bad]} -> {frame.timestamps[bad + 1]}"
        )

    constant = [
        name for name, col in zip(frame.channel_names, frame.values.T)
        if len(col) and np.all(col == col[0])
    ]
    if constant:
        warnings.warn(
            f"Constant channel(s) {constant}: standardization will map them to zero.",
            UserWarning
        )

    return True
