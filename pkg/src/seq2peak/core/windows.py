"""Synthetic series, chronological splits, standardization and supervised windows."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from ..utils.data_loader import TimeSeriesFrame
from ..utils.validators import (
    PERIOD,
    ConfigurationError,
    ParameterError,
    ShapeError,
    require_multiple_of_period,
    validate_ratios,
)

STD_FLOOR = 1e-8
SYNTHETIC_START = "2016-07-01 00:00:00"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a seeded daily-periodic test series."""

    length: int = 24 * 400
    channels: int = 1
    daily_amplitude: float = 1.0
    trend_slope: float = 0.0
    noise_std: float = 0.5
    peak_jitter_std: float = 0.5
    seed: int = 0
    level_std: float = 0.0
    level_persistence: float = 0.9

    def __post_init__(self):
        if self.length < 2 * PERIOD:
            raise ParameterError(f"length must be at least {2 * PERIOD} hours, got {self.length}")
        if self.channels < 1:
            raise ParameterError(f"channels must be >= 1, got {self.channels}")
        if self.noise_std < 0 or self.peak_jitter_std < 0:
            raise ParameterError("noise_std and peak_jitter_std must be non-negative")
        if self.level_std < 0:
            raise ParameterError(f"level_std must be non-negative, got {self.level_std}")
        if not 0.0 <= self.level_persistence < 1.0:
            raise ParameterError(
                f"level_persistence must be in [0, 1), got {self.level_persistence}"
            )


def gen_synthetic(spec):
    """
    Generate a daily sinusoid with trend, Gaussian noise and jittered daily peaks.

    value[t, j] = A*sin(2*pi*((t + phi_j) mod 24)/24) + slope*t + level[t, j] + noise, then
    each day's argmax hour (per channel) receives an extra N(0, jitter) draw.
    ``level`` is zero unless ``level_std > 0``; it is then a stationary hourly AR(1)
    whose day-to-day correlation is ``level_persistence``, drawn from its own stream
    so the other draws do not depend on it.
    Timestamps start at midnight so hour-of-day equals row index mod 24.

    Args:
        spec: SyntheticSpec

    Returns:
        TimeSeriesFrame with channels named ch0, ch1, ...
    """
    rng = np.random.default_rng(spec.seed)
    phase_offsets = rng.integers(0, PERIOD, size=spec.channels)

    t = np.arange(spec.length)[:, None]
    cycle = ((t + phase_offsets[None, :]) % PERIOD) / PERIOD
    values = spec.daily_amplitude * np.sin(2 * np.pi * cycle) + spec.trend_slope * t
    if spec.level_std > 0:
        values = values + ar1_level(spec)
    if spec.noise_std > 0:
        values = values + rng.normal(0.0, spec.noise_std, size=values.shape)

    if spec.peak_jitter_std > 0:
        for start in range(0, spec.length, PERIOD):
            day = values[start:start + PERIOD]
            peak_rows = start + np.argmax(day, axis=0)
            jitter = rng.normal(0.0, spec.peak_jitter_std, size=spec.channels)
            values[peak_rows, np.arange(spec.channels)] += jitter

    timestamps = pd.date_range(SYNTHETIC_START, periods=spec.length, freq="h")
    names = tuple(f"ch{j}" for j in range(spec.channels))
    return TimeSeriesFrame(timestamps, values, names)


def ar1_level(spec):
    """Stationary AR(1) level, (length, channels), std ``level_std``."""
    phi = spec.level_persistence ** (1.0 / PERIOD)
    shocks = np.random.default_rng([spec.seed, 1]).normal(size=(spec.length, spec.channels))
    shocks[1:] *= np.sqrt(1.0 - phi * phi)
    return spec.level_std * lfilter([1.0], [1.0, -phi], shocks, axis=0)


def split(frame, ratios=(0.6, 0.2, 0.2), min_length=None):
    """
    Contiguous chronological train/val/test split.

    Train and val lengths are floor(L * ratio); the remainder goes to test.

    Args:
        frame: TimeSeriesFrame
        ratios: (train, val, test) fractions summing to 1
        min_length: Minimum rows per split, normally N + M

    Returns:
        (train, val, test) frames
    """
    ratios = validate_ratios(ratios)
    n = len(frame)
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_val = math.floor(n * ratios[1] + 1e-9)
    bounds = [(0, n_train), (n_train, n_train + n_val), (n_train + n_val, n)]

    parts = []
    for name, (start, stop) in zip(("train", "val", "test"), bounds):
        size = stop - start
        if size <= 0 or (min_length is not None and size < min_length):
            raise ConfigurationError(
                f"{name} split has {size} rows; at least {min_length or 1} needed for one window"
            )
        parts.append(frame.slice(start, stop))
    return tuple(parts)


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and (floored, population) std of the training split."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, values):
        return (values - self.mean) / self.std

    def invert(self, values):
        return values * self.std + self.mean


def standardize(train, others=()):
    """
    Z-score every split with statistics of the training split only.

    Args:
        train: Training TimeSeriesFrame (non-empty)
        others: Further frames (validation, test) to transform

    Returns:
        (standardized train, list of standardized others, ChannelStats)
    """
    if len(train) == 0:
        raise ConfigurationError("Cannot standardize on an empty training split")
    mean = train.values.mean(axis=0)
    std = np.maximum(train.values.std(axis=0), STD_FLOOR)
    stats = ChannelStats(mean, std)
    transformed = [f.with_values(stats.apply(f.values)) for f in others]
    return train.with_values(stats.apply(train.values)), transformed, stats


def extract_peak(y, period=PERIOD):
    """
    Daily maxima of a forecast window, per channel.

    Args:
        y: Array (..., M, c) with M a multiple of ``period``

    Returns:
        Array (..., M / period, c)
    """
    y = np.asarray(y)
    m = y.shape[-2]
    if m % period != 0:
        raise ShapeError(f"Window length {m} is not a multiple of {period}")
    days = y.reshape(y.shape[:-2] + (m // period, period, y.shape[-1]))
    return days.max(axis=-2)


@dataclass(frozen=True)
class WindowSample:
    """One supervised instance cut from a frame."""

    X: np.ndarray
    Y: np.ndarray
    Y_peak: np.ndarray
    start_phase: int
    origin_index: int


class WindowSet(Sequence):
    """
    All windows of a frame at a fixed stride, stored as strided views.

    Indexing yields WindowSample objects; ``batch`` returns stacked arrays for
    training. ``Y_peak`` is on the frame's (standardized) scale, ``Y_peak_raw``
    on the scale of ``raw_values`` when those are supplied.
    """

    def __init__(self, frame, input_hours, horizon_hours, stride=1, raw_values=None):
        require_multiple_of_period(input_hours, "N")
        require_multiple_of_period(horizon_hours, "M")
        if stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {stride}")
        if input_hours + horizon_hours > len(frame):
            raise ConfigurationError(
                f"N + M = {input_hours + horizon_hours} exceeds frame length {len(frame)}"
            )

        self.frame = frame
        self.input_hours = input_hours
        self.horizon_hours = horizon_hours
        self.stride = stride
        span = input_hours + horizon_hours
        self.origins = np.arange(0, len(frame) - span + 1, stride)
        self.start_phases = frame.hours[self.origins]

        # (S, c, span) -> (S, span, c); views, no copy
        full = sliding_window_view(frame.values, span, axis=0)[::stride]
        self._windows = np.swapaxes(full, 1, 2)
        self.Y_peak = self._peaks(self._windows[:, input_hours:])

        self.raw_values = None if raw_values is None else np.asarray(raw_values, dtype=float)
        if self.raw_values is not None:
            raw_full = sliding_window_view(self.raw_values, span, axis=0)[::stride]
            self.Y_peak_raw = self._peaks(np.swapaxes(raw_full, 1, 2)[:, input_hours:])
        else:
            self.Y_peak_raw = None

    @staticmethod
    def _peaks(y, chunk=1024):
        # Chunked to bound the copy made by reshaping strided views
        out = [extract_peak(y[i:i + chunk]) for i in range(0, len(y), chunk)]
        if not out:
            return np.empty((0, y.shape[1] // PERIOD, y.shape[2]))
        return np.concatenate(out)

    @property
    def X(self):
        return self._windows[:, :self.input_hours]

    @property
    def Y(self):
        return self._windows[:, self.input_hours:]

    @property
    def n_channels(self):
        return self.frame.n_channels

    def __len__(self):
        return len(self.origins)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        return WindowSample(
            X=self.X[i],
            Y=self.Y[i],
            Y_peak=self.Y_peak[i],
            start_phase=int(self.start_phases[i]),
            origin_index=int(self.origins[i]),
        )

    def batch(self, indices):
        """Stacked (X, Y, Y_peak, start_phases) for the given window indices."""
        indices = np.asarray(indices)
        return (
            np.ascontiguousarray(self.X[indices]),
            np.ascontiguousarray(self.Y[indices]),
            self.Y_peak[indices],
            self.start_phases[indices],
        )


def make_windows(frame, N, M, stride=1, raw_values=None):
    """
    Cut supervised windows at origins 0, stride, 2*stride, ...

    Args:
        frame: TimeSeriesFrame
        N: Input length in hours (multiple of 24)
        M: Forecast length in hours (multiple of 24)
        stride: Hours between origins
        raw_values: Optional unstandardized values aligned with ``frame``

    Returns:
        WindowSet of L - N - M + 1 windows at stride 1
    """
    return WindowSet(frame, N, M, stride=stride, raw_values=raw_values)
