"""Tests for autocorrelation analysis."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from seq2peak.analysis.acf import acf, acf_table, compare_full_vs_peak, peak_series
from seq2peak.core.windows import SyntheticSpec, gen_synthetic
from seq2peak.utils.data_loader import TimeSeriesFrame, load_csv
from seq2peak.utils.validators import DegenerateSeriesError, ParameterError

ETTH1 = Path("data/raw/ETTh1.csv")


class TestAcf:

    def test_known_values(self):
        """Biased estimator on a short ramp."""
        r, limit = acf([1.0, 2.0, 3.0, 4.0, 5.0], 2)
        assert r[0] == pytest.approx(1.0)
        assert r[1] == pytest.approx(0.4)
        assert r[2] == pytest.approx(((-2) * 0 + (-1) * 1 + 0 * 2) / 5 / 2)
        assert limit == pytest.approx(1.96 / np.sqrt(5))

    def test_table(self):
        """max_lag + 1 rows with a constant limit column."""
        x = np.random.default_rng(0).normal(size=500)
        table = acf_table(x, 96)
        assert list(table.columns) == ["lag", "acf", "limit"]
        assert len(table) == 97
        assert table["limit"].nunique() == 1

    def test_periodic_series(self):
        """A pure daily cycle has r(24) close to 1."""
        x = np.sin(2 * np.pi * np.arange(24 * 100) / 24)
        r, _ = acf(x, 24)
        assert r[24] > 0.95

    @pytest.mark.parametrize("lag", [0, 10])
    def test_bad_lag(self, lag):
        """max_lag must lie in [1, n)."""
        with pytest.raises(ParameterError):
            acf(np.arange(10.0), lag)

    def test_constant(self):
        """Zero variance is degenerate."""
        with pytest.raises(DegenerateSeriesError):
            acf(np.ones(50), 5)


class TestPeakSeries:

    def test_complete_days(self):
        """Rows before the first midnight and after the last full day are dropped."""
        values = np.arange(60, dtype=float)
        hours = (np.arange(60) + 20) % 24  # starts at 20:00
        peaks = peak_series(values, hours)
        assert peaks.tolist() == [27.0, 51.0]

    def test_multichannel(self):
        """Channels are kept."""
        values = np.random.default_rng(0).normal(size=(72, 3))
        assert peak_series(values).shape == (3, 3)


class TestCompare:

    def test_synthetic(self):
        """Both tables and the headline lags are returned."""
        frame = gen_synthetic(SyntheticSpec(length=24 * 200, seed=0))
        result = compare_full_vs_peak(frame, "ch0", 96)
        assert len(result["full"]) == 97
        assert result["full_r24"] == result["full"]["acf"].iloc[24]
        assert result["peak_r1"] == result["peak"]["acf"].iloc[1]

    def test_short_peak_series(self):
        """The peak ACF is limited by the number of days."""
        frame = TimeSeriesFrame(pd.date_range("2020", periods=24 * 10, freq="h"),
                                np.random.default_rng(1).normal(size=240), ("x",))
        result = compare_full_vs_peak(frame, "x", 48)
        assert len(result["peak"]) == 10

    @pytest.mark.skipif(not ETTH1.exists(), reason=f"File not found: {ETTH1}")
    def test_etth1_ot(self):
        """On ETTh1 OT the hourly series is more autocorrelated at 24h than peaks at 1 day."""
        result = compare_full_vs_peak(load_csv(ETTH1), "OT", 96)
        assert result["full_r24"] > result["peak_r1"]

    def test_hourly_beats_peaks_across_seeds(self):
        """Hourly r(24) exceeds peak r(1) for at least 9 of 10 synthetic seeds."""
        wins = 0
        for seed in range(10):
            frame = gen_synthetic(SyntheticSpec(length=24 * 400, noise_std=0.5,
                                                peak_jitter_std=0.5, seed=seed))
            result = compare_full_vs_peak(frame, "ch0", 96)
            wins += result["full_r24"] > result["peak_r1"]
        assert wins >= 9
