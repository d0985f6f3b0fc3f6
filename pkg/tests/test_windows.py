"""Tests for synthetic data, splitting, standardization and windowing."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seq2peak.core.windows import (
    SyntheticSpec,
    extract_peak,
    gen_synthetic,
    make_windows,
    split,
    standardize,
)
from seq2peak.utils.data_loader import TimeSeriesFrame
from seq2peak.utils.validators import ConfigurationError, ParameterError, ShapeError


def ramp_frame(n, channels=1, start="2020-01-01 00:00"):
    values = np.arange(n * channels, dtype=float).reshape(n, channels)
    return TimeSeriesFrame(pd.date_range(start, periods=n, freq="h"), values,
                           tuple(f"c{j}" for j in range(channels)))


def brute_force_peaks(y):
    m, c = y.shape
    out = np.empty((m // 24, c))
    for d in range(m // 24):
        for j in range(c):
            best = y[d * 24, j]
            for k in range(1, 24):
                if y[d * 24 + k, j] > best:
                    best = y[d * 24 + k, j]
            out[d, j] = best
    return out


class TestSynthetic:

    def test_deterministic(self):
        """The same seed gives bit-identical series."""
        a = gen_synthetic(SyntheticSpec(length=240, channels=2, seed=3))
        b = gen_synthetic(SyntheticSpec(length=240, channels=2, seed=3))
        np.testing.assert_array_equal(a.values, b.values)

    def test_seed_changes_series(self):
        """Different seeds give different series."""
        a = gen_synthetic(SyntheticSpec(length=240, seed=0))
        b = gen_synthetic(SyntheticSpec(length=240, seed=1))
        assert not np.array_equal(a.values, b.values)

    def test_noiseless_is_periodic(self):
        """Without noise or jitter every day repeats exactly."""
        frame = gen_synthetic(SyntheticSpec(length=240, noise_std=0.0, peak_jitter_std=0.0))
        days = frame.values.reshape(10, 24, 1)
        np.testing.assert_allclose(days, np.broadcast_to(days[0], days.shape), atol=1e-12)

    def test_starts_at_midnight(self):
        """Row index mod 24 equals hour-of-day."""
        frame = gen_synthetic(SyntheticSpec(length=96))
        np.testing.assert_array_equal(frame.hours, np.arange(96) % 24)

    def test_invalid(self):
        """Too short or negative noise fails."""
        with pytest.raises(ParameterError):
            SyntheticSpec(length=10)
        with pytest.raises(ParameterError):
            SyntheticSpec(noise_std=-1.0)

    @pytest.mark.parametrize("kwargs", [{"level_std": -0.1}, {"level_persistence": 1.0}])
    def test_invalid_level(self, kwargs):
        """Level std must be non-negative and its persistence below one."""
        with pytest.raises(ParameterError):
            SyntheticSpec(**kwargs)

    def test_level_off_by_default(self):
        """Without level_std the persistence setting changes nothing."""
        a = gen_synthetic(SyntheticSpec(length=480, channels=2, seed=3))
        b = gen_synthetic(SyntheticSpec(length=480, channels=2, seed=3, level_persistence=0.5))
        np.testing.assert_array_equal(a.values, b.values)

    def test_level_component(self):
        """The added level has the requested std and day-to-day correlation."""
        common = dict(length=24 * 2000, peak_jitter_std=0.0, seed=2, level_persistence=0.5)
        with_level = gen_synthetic(SyntheticSpec(level_std=1.0, **common)).values[:, 0]
        without = gen_synthetic(SyntheticSpec(**common)).values[:, 0]
        level = with_level - without
        assert level.std() == pytest.approx(1.0, abs=0.15)
        assert np.corrcoef(level[24:], level[:-24])[0, 1] == pytest.approx(0.5, abs=0.12)


class TestSplit:

    def test_lengths(self):
        """Train/val get floor(L * r), test gets the remainder, contiguously."""
        train, val, test = split(ramp_frame(1001), (0.6, 0.2, 0.2))
        assert (len(train), len(val), len(test)) == (600, 200, 201)
        assert train.values[-1, 0] + 1 == val.values[0, 0]
        assert val.values[-1, 0] + 1 == test.values[0, 0]

    def test_too_short(self):
        """A split shorter than one window is a configuration error."""
        with pytest.raises(ConfigurationError, match="val split"):
            split(ramp_frame(500), (0.8, 0.1, 0.1), min_length=96)


class TestStandardize:

    def test_train_statistics_only(self):
        """Train becomes zero-mean unit-std; others use train statistics."""
        train, (val,), stats = standardize(ramp_frame(100), [ramp_frame(10)])
        np.testing.assert_allclose(train.values.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(train.values.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(val.values, (np.arange(10.0)[:, None] - 49.5) / stats.std)

    def test_invert(self):
        """invert undoes apply."""
        _, _, stats = standardize(ramp_frame(50, channels=2))
        x = np.random.default_rng(0).normal(size=(7, 2))
        np.testing.assert_allclose(stats.invert(stats.apply(x)), x)

    def test_constant_channel_floored(self):
        """A constant channel gets the floor std instead of dividing by zero."""
        frame = TimeSeriesFrame(pd.date_range("2020", periods=48, freq="h"), np.ones((48, 1)), ("k",))
        train, _, stats = standardize(frame)
        assert stats.std[0] > 0
        assert np.all(np.isfinite(train.values))


class TestExtractPeak:

    def test_matches_brute_force(self):
        """Daily maxima agree with a linear scan on random matrices."""
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = int(rng.choice([24, 48, 120]))
            c = int(rng.choice([1, 7]))
            y = rng.normal(size=(m, c))
            np.testing.assert_array_equal(extract_peak(y), brute_force_peaks(y))

    def test_batched(self):
        """Leading axes are preserved."""
        y = np.random.default_rng(1).normal(size=(5, 48, 3))
        assert extract_peak(y).shape == (5, 2, 3)

    def test_indivisible(self):
        """M that is not whole days fails."""
        with pytest.raises(ShapeError):
            extract_peak(np.zeros((30, 1)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.sampled_from([24, 48, 72]), st.integers(1, 4)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_peak_bounds(self, y):
        """Each daily peak is attained within its day and bounds every value of the day."""
        peaks = extract_peak(y)
        days = y.reshape(-1, 24, y.shape[1])
        assert np.all(days <= peaks[:, None, :])
        assert np.all(np.any(days == peaks[:, None, :], axis=1))


class TestMakeWindows:

    def test_count_and_content(self):
        """L - N - M + 1 windows at stride 1, each a contiguous slice."""
        frame = ramp_frame(200)
        ws = make_windows(frame, 48, 24)
        assert len(ws) == 200 - 72 + 1
        sample = ws[10]
        np.testing.assert_array_equal(sample.X[:, 0], np.arange(10, 58))
        np.testing.assert_array_equal(sample.Y[:, 0], np.arange(58, 82))
        assert sample.Y_peak[0, 0] == 81
        assert sample.origin_index == 10
        assert sample.start_phase == 10

    def test_stride(self):
        """Origins advance by the stride."""
        ws = make_windows(ramp_frame(200), 48, 24, stride=24)
        assert ws.origins.tolist() == list(range(0, 129, 24))
        assert set(ws.start_phases.tolist()) == {0}

    def test_phase_follows_timestamps(self):
        """Start phase is the hour-of-day of the first input row."""
        ws = make_windows(ramp_frame(120, start="2020-01-01 05:00"), 48, 24)
        assert ws[0].start_phase == 5
        assert ws[20].start_phase == 1

    def test_batch(self):
        """batch stacks windows in the requested order."""
        ws = make_windows(ramp_frame(150, channels=2), 48, 48)
        X, Y, Y_peak, phases = ws.batch([3, 0])
        assert X.shape == (2, 48, 2) and Y.shape == (2, 48, 2) and Y_peak.shape == (2, 2, 2)
        np.testing.assert_array_equal(X[1], ws[0].X)
        assert phases.tolist() == [3, 0]

    def test_raw_peaks(self):
        """Raw peaks come from the raw values at the same positions."""
        frame = ramp_frame(100)
        ws = make_windows(frame, 24, 24, raw_values=frame.values * 2)
        np.testing.assert_array_equal(ws.Y_peak_raw, ws.Y_peak * 2)

    def test_invalid_lengths(self):
        """N, M must be whole days and fit in the frame."""
        with pytest.raises(ConfigurationError):
            make_windows(ramp_frame(100), 30, 24)
        with pytest.raises(ConfigurationError):
            make_windows(ramp_frame(60), 48, 24)
