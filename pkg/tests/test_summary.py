"""Tests for across-seed statistics."""

import numpy as np
import pandas as pd
import pytest

from seq2peak.analysis.summary import (
    compare_to_baseline,
    relative_improvement,
    seed_summary,
    sign_flip_p_value,
    win_count,
)


def test_seed_summary():
    """Mean, sample std and standard error."""
    s = seed_summary([1.0, 2.0, 3.0])
    assert s["n"] == 3
    assert s["mean"] == pytest.approx(2.0)
    assert s["std"] == pytest.approx(1.0)
    assert s["sem"] == pytest.approx(1.0 / np.sqrt(3))


def test_seed_summary_single():
    """One seed has no spread."""
    s = seed_summary([0.4])
    assert s["mean"] == 0.4
    assert np.isnan(s["std"]) and np.isnan(s["sem"])


def test_relative_improvement():
    """0.306 -> 0.240 is about a 21.6% improvement."""
    assert relative_improvement(0.306, 0.240) == pytest.approx(0.2157, abs=1e-4)
    assert np.isnan(relative_improvement(0.0, 1.0))


def test_win_count():
    """Strictly lower errors count as wins."""
    assert win_count([1.0, 1.0, 1.0], [0.5, 1.0, 2.0]) == 1


class TestSignFlip:

    def test_all_improved(self):
        """Five consistent improvements give the smallest attainable p = 1/32."""
        p = sign_flip_p_value([1.0, 1.2, 0.9, 1.1, 1.3], [0.8, 1.0, 0.7, 0.9, 1.1])
        assert p == pytest.approx(1 / 32)

    def test_no_difference(self):
        """Identical errors give p = 1."""
        assert sign_flip_p_value([1.0] * 4, [1.0] * 4) == 1.0

    def test_worse(self):
        """A uniformly worse variant is not significant."""
        assert sign_flip_p_value([0.5] * 5, [1.0] * 5) > 0.9

    def test_resampled(self):
        """Large samples fall back to seeded resampling and stay in (0, 1]."""
        rng = np.random.default_rng(0)
        base = rng.normal(1.0, 0.1, size=30)
        p1 = sign_flip_p_value(base, base - 0.05)
        p2 = sign_flip_p_value(base, base - 0.05)
        assert p1 == p2
        assert 0 < p1 < 0.01


def test_compare_to_baseline():
    """One row per variant with the baseline as reference."""
    rows = pd.DataFrame({
        "variant": ["sfs"] * 3 + ["seq2peak"] * 3,
        "seed": [0, 1, 2] * 2,
        "mse": [1.0, 1.1, 0.9, 0.8, 0.9, 0.7],
    })
    table = compare_to_baseline(rows, "sfs")
    assert table.loc["sfs", "rel_improvement"] == 0.0
    assert table.loc["seq2peak", "wins"] == 3
    assert table.loc["seq2peak", "rel_improvement"] == pytest.approx(0.2)
    assert table.loc["seq2peak", "p_value"] == pytest.approx(1 / 8)
    with pytest.raises(KeyError):
        compare_to_baseline(rows, "pfp")
