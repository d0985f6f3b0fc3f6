"""Autocorrelation of full hourly series and their daily peak series."""

import numpy as np
import pandas as pd
from statsmodels.tsa.stattools import acf as _acf

from ..core.windows import extract_peak
from ..utils.validators import PERIOD, DegenerateSeriesError, ParameterError

CONFIDENCE_Z = 1.96


def acf(x, max_lag):
    """
    Sample autocorrelation r(0..max_lag) with the biased (1/n) estimator.

    Args:
        x: 1-D series
        max_lag: Largest lag, 1 <= max_lag < len(x)

    Returns:
        (r, limit): r has max_lag + 1 entries with r[0] = 1; limit is the
        white-noise band 1.96 / sqrt(n)

    Raises:
        ParameterError: If max_lag is out of range.
        DegenerateSeriesError: If the series has zero variance.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    n = len(x)
    if max_lag < 1 or max_lag >= n:
        raise ParameterError(f"max_lag must satisfy 1 <= max_lag < n={n}, got {max_lag}")
    if np.var(x) == 0.0:
        raise DegenerateSeriesError("ACF undefined for a constant series")

    r = _acf(x, nlags=max_lag, adjusted=False, fft=True, missing="raise")
    return r, CONFIDENCE_Z / np.sqrt(n)


def peak_series(values, hours=None):
    """
    Daily maxima of an hourly series over complete calendar days.

    Args:
        values: (L,) or (L, c)
        hours: Hour-of-day of each row; rows before the first midnight are
            dropped. Assumes row 0 is midnight when omitted.

    Returns:
        (D,) or (D, c) array of daily peaks
    """
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]

    start = 0
    if hours is not None:
        midnight = np.flatnonzero(np.asarray(hours) == 0)
        start = int(midnight[0]) if len(midnight) else len(values)
    days = (len(values) - start) // PERIOD
    peaks = extract_peak(values[start:start + days * PERIOD])
    return peaks[:, 0] if squeeze else peaks


def acf_table(x, max_lag):
    """ACF as a DataFrame with columns lag, acf, limit."""
    r, limit = acf(x, max_lag)
    return pd.DataFrame({"lag": np.arange(max_lag + 1), "acf": r, "limit": limit})


def compare_full_vs_peak(frame, channel, max_lag):
    """
    ACF of a channel's hourly series and of its daily peak series.

    The peak series is max_lag-limited to its own length.

    Returns:
        dict with 'full' and 'peak' tables, 'full_r24' (hourly lag 24) and
        'peak_r1' (daily lag 1)
    """
    values = frame.values[:, frame.channel_index(channel)]
    full = acf_table(values, max_lag)
    peaks = peak_series(values, frame.hours)
    peak = acf_table(peaks, min(max_lag, len(peaks) - 1))

    full_r24 = float(full["acf"].iloc[PERIOD]) if max_lag >= PERIOD else float(acf(values, PERIOD)[0][PERIOD])
    return {
        "full": full,
        "peak": peak,
        "full_r24": full_r24,
        "peak_r1": float(peak["acf"].iloc[1]),
    }
