"""Across-seed statistics for experiment metrics."""

import itertools

import numpy as np
import pandas as pd
from scipy import stats

EXACT_SIGN_FLIP_LIMIT = 16


def seed_summary(values):
    """
    Mean, std and standard error of per-seed values.

    Args:
        values: One metric per seed

    Returns:
        dict with n, mean, std (ddof=1) and sem; std and sem are NaN for n < 2
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    if n == 0:
        return {"n": 0, "mean": np.nan, "std": np.nan, "sem": np.nan}
    if n == 1:
        return {"n": 1, "mean": float(x[0]), "std": np.nan, "sem": np.nan}
    return {
        "n": n,
        "mean": float(np.mean(x)),
        "std": float(np.std(x, ddof=1)),
        "sem": float(stats.sem(x)),
    }


def relative_improvement(baseline, variant):
    """(baseline - variant) / baseline; positive when the variant has lower error."""
    if baseline == 0:
        return np.nan
    return (baseline - variant) / baseline


def win_count(baseline, variant):
    """Number of seeds on which the variant's error is strictly lower."""
    return int(np.sum(np.asarray(variant) < np.asarray(baseline)))


def sign_flip_p_value(baseline, variant, max_exact=EXACT_SIGN_FLIP_LIMIT, n_resamples=9999, seed=0):
    """
    Paired sign-flip permutation test that the variant lowers the error.

    The statistic is the mean paired difference baseline - variant. All 2^n
    sign assignments are enumerated for n <= ``max_exact``, otherwise
    ``n_resamples`` are drawn. The p-value counts null statistics at least as
    large as the observed one: P = (r + 1) / (n_null + 1).

    Args:
        baseline, variant: Per-seed errors, paired by position

    Returns:
        One-sided empirical p-value
    """
    d = np.asarray(baseline, dtype=np.float64) - np.asarray(variant, dtype=np.float64)
    n = len(d)
    if n == 0:
        return np.nan
    observed = d.mean()

    if n <= max_exact:
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
        signs = signs[1:]  # drop the identity assignment
    else:
        rng = np.random.default_rng(seed)
        signs = rng.choice((1.0, -1.0), size=(n_resamples, n))

    null = (signs * d).mean(axis=1)
    r = np.sum(null >= observed - 1e-12)
    return float((r + 1) / (len(null) + 1))


def compare_to_baseline(per_seed, baseline, metric="mse"):
    """
    Summarize every variant against a baseline across seeds.

    Args:
        per_seed: DataFrame with columns variant, seed and ``metric``
        baseline: Name of the baseline variant

    Returns:
        DataFrame indexed by variant: n, mean, std, sem, rel_improvement,
        wins, p_value
    """
    wide = per_seed.pivot(index="seed", columns="variant", values=metric).sort_index()
    if baseline not in wide.columns:
        raise KeyError(f"Baseline '{baseline}' not among variants {list(wide.columns)}")

    base = wide[baseline].to_numpy()
    rows = []
    for variant in wide.columns:
        vals = wide[variant].to_numpy()
        summary = seed_summary(vals)
        is_base = variant == baseline
        rows.append({
            "variant": variant,
            **summary,
            "rel_improvement": 0.0 if is_base else relative_improvement(np.mean(base), summary["mean"]),
            "wins": np.nan if is_base else win_count(base, vals),
            "p_value": np.nan if is_base else sign_flip_p_value(base, vals),
        })
    return pd.DataFrame(rows).set_index("variant")
