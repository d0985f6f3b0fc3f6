"""Tests for validators."""

import numpy as np
import pandas as pd
import pytest

from seq2peak.utils import validators
from seq2peak.utils.data_loader import TimeSeriesFrame


def make_frame(values, freq="h", start="2020-01-01"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    ts = pd.date_range(start, periods=len(values), freq=freq)
    return TimeSeriesFrame(ts, values, tuple(f"c{j}" for j in range(values.shape[1])))


def test_exit_codes():
    """Validation errors map to exit 1, runtime errors to exit 2."""
    assert validators.ConfigurationError.exit_code == 1
    assert validators.ShapeError.exit_code == 1
    assert validators.FetchError.exit_code == 2
    assert validators.DivergenceError(3, float("nan")).exit_code == 2


def test_validation_errors_are_value_errors():
    """Every validation error is also a ValueError."""
    for cls in (validators.ConfigurationError, validators.AlignmentError,
                validators.MalformedInputError, validators.SpacingError):
        assert issubclass(cls, ValueError)


def test_divergence_error_names_epoch():
    """The divergence message carries the epoch."""
    err = validators.DivergenceError(7, float("nan"))
    assert err.epoch == 7
    assert "epoch 7" in str(err)


class TestRequireMultipleOfPeriod:

    def test_returns_days(self):
        """720 hours is 30 days."""
        assert validators.require_multiple_of_period(720, "N") == 30

    @pytest.mark.parametrize("n", [0, -24, 25, 100])
    def test_rejects_partial_days(self, n):
        """Lengths that are not positive whole days fail."""
        with pytest.raises(validators.ConfigurationError, match="multiple of 24"):
            validators.require_multiple_of_period(n, "N")

    def test_custom_error(self):
        """The raised class is configurable."""
        with pytest.raises(validators.ShapeError):
            validators.require_multiple_of_period(30, "M", error=validators.ShapeError)


class TestAlphaAndRatios:

    @pytest.mark.parametrize("alpha", [0, 0.3, 1])
    def test_alpha_in_range(self, alpha):
        """Endpoints and interior values are accepted."""
        assert validators.validate_alpha(alpha) == float(alpha)

    @pytest.mark.parametrize("alpha", [-0.01, 1.01, None])
    def test_alpha_out_of_range(self, alpha):
        """Values outside [0, 1] raise a parameter error."""
        with pytest.raises(validators.ParameterError):
            validators.validate_alpha(alpha)

    def test_ratios_valid(self):
        """Three positive fractions summing to one pass through."""
        assert validators.validate_ratios([0.6, 0.2, 0.2]) == (0.6, 0.2, 0.2)

    @pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.6, 0.3, 0.2), (0.8, 0.2, 0.0)])
    def test_ratios_invalid(self, ratios):
        """Wrong count, wrong sum or a zero fraction fail."""
        with pytest.raises(validators.ConfigurationError):
            validators.validate_ratios(ratios)


class TestValidateFrame:

    def test_valid(self):
        """An hourly finite frame is valid."""
        assert validators.validate_frame(make_frame(np.arange(48.0))) is True

    def test_empty(self):
        """An empty frame is rejected."""
        with pytest.raises(ValueError, match="empty"):
            validators.validate_frame(make_frame(np.empty((0, 1))))

    def test_non_finite(self):
        """NaN values are reported with their channel."""
        values = np.arange(48.0)
        values[5] = np.nan
        with pytest.raises(validators.MalformedInputError, match="c0"):
            validators.validate_frame(make_frame(values))

    def test_non_hourly(self):
        """Half-hourly timestamps fail the spacing check."""
        with pytest.raises(validators.SpacingError):
            validators.validate_frame(make_frame(np.arange(48.0), freq="30min"))

    def test_constant_channel_warns(self):
        """A constant channel is allowed but produces a warning."""
        values = np.column_stack([np.arange(48.0), np.ones(48)])
        with pytest.warns(UserWarning, match="Constant channel"):
            assert validators.validate_frame(make_frame(values)) is True
