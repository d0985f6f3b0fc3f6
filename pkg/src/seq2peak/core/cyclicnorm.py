"""
Cyclic Normalization.

Stage 1 standardizes each hour-of-day sub-sequence of the input window with its
own mean and std. Stage 2 passes those per-phase statistics through a trainable
shift. Stage 3 maps the model output back with the shifted statistics, the
forecast's hours continuing the input's daily cycle.

Statistics are indexed by absolute hour-of-day (row i of ``means`` belongs to
hour i), so shift parameters see the same hour in every window. All functions
accept a leading batch axis with one anchor per window.
"""

from dataclasses import dataclass

import numpy as np

from ..utils.validators import PERIOD, AlignmentError, ConfigurationError, ShapeError
from . import gradengine as ge

SIGMA_FLOOR = 1e-5
SHIFT_VARIANTS = ("identity", "affine", "linear")


@dataclass(frozen=True)
class PhaseStats:
    """
    Per-phase statistics of one window (or a batch of windows).

    means, stds: (T, c) or (B, T, c), row i = hour-of-day i
    anchor_phase: hour-of-day of the first input row (int, or (B,) array)
    window_length: N, the number of input rows the stats were computed from
    """

    means: np.ndarray
    stds: np.ndarray
    anchor_phase: object
    window_length: int

    @property
    def forecast_anchor(self):
        return (np.asarray(self.anchor_phase) + self.window_length) % PERIOD


def phase_index(anchor_phase, length):
    """Hour-of-day of each of ``length`` rows starting at ``anchor_phase``; (R,) or (B, R)."""
    anchor = np.asarray(anchor_phase, dtype=np.int64)
    return (anchor[..., None] + np.arange(length)) % PERIOD


def compute_phase_stats(X, anchor_phase):
    """
    Mean and population std of each hour-of-day sub-sequence.

    Args:
        X: Window (N, c) or batch (B, N, c), N a multiple of 24
        anchor_phase: Hour-of-day of row 0 (int or (B,) array)

    Returns:
        PhaseStats with stds floored at SIGMA_FLOOR
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[-2]
    if n == 0 or n % PERIOD != 0:
        raise ShapeError(f"Window length {n} is not a positive multiple of {PERIOD}")

    days = X.reshape(X.shape[:-2] + (n // PERIOD, PERIOD, X.shape[-1]))
    rel_mean = days.mean(axis=-3)
    rel_std = days.std(axis=-3)

    # Relative column k holds hour (anchor + k) mod 24; reorder to absolute hours
    anchor = np.asarray(anchor_phase, dtype=np.int64)
    order = (np.arange(PERIOD) - anchor[..., None]) % PERIOD
    means = np.take_along_axis(rel_mean, order[..., None], axis=-2)
    stds = np.take_along_axis(rel_std, order[..., None], axis=-2)
    return PhaseStats(means, np.maximum(stds, SIGMA_FLOOR), anchor_phase, n)


def _row_stats(stats, anchor_phase, length):
    idx = phase_index(anchor_phase, length)
    if stats.means.ndim == 2:
        return stats.means[idx], stats.stds[idx]
    b = np.arange(idx.shape[0])[:, None]
    return stats.means[b, idx], stats.stds[b, idx]


def normalize(X, stats, anchor_phase=None):
    """
    X'[r] = (X[r] - mu[phase(r)]) / sigma[phase(r)].

    Args:
        X: Window (N, c) or batch (B, N, c)
        stats: PhaseStats of the same window
        anchor_phase: Hour-of-day of X's first row; checked against the stats

    Raises:
        AlignmentError: If ``anchor_phase`` disagrees with the stats' anchor.
    """
    if anchor_phase is not None and not np.array_equal(
        np.asarray(anchor_phase) % PERIOD, np.asarray(stats.anchor_phase) % PERIOD
    ):
        raise AlignmentError(
            f"Window anchored at hour {anchor_phase}, stats at hour {stats.anchor_phase}"
        )
    X = np.asarray(X, dtype=np.float64)
    mu, sigma = _row_stats(stats, stats.anchor_phase, X.shape[-2])
    return (X - mu) / sigma


class ShiftParams:
    """
    Trainable transform of per-phase statistics.

    identity: no parameters.
    affine: M' = a_M * M + b_M, S' = clamp(a_S * S + b_S, eps); each (T, c).
    linear: M' = W_M @ M + b_M, S' = clamp(W_S @ S + b_S, eps); W (T, T) shared
        across channels, b (T, c).

    ``shift_means`` / ``shift_stds`` switch each half off (identity on that half).
    All variants initialize to the identity map.
    """

    def __init__(self, variant="identity", channels=1, shift_means=True, shift_stds=True):
        if variant not in SHIFT_VARIANTS:
            raise ConfigurationError(f"Unknown shift variant '{variant}'. Use one of {SHIFT_VARIANTS}")
        self.variant = variant
        self.channels = channels
        self.shift_means = shift_means and variant != "identity"
        self.shift_stds = shift_stds and variant != "identity"
        self._params = {}
        self.init()

    def init(self):
        c, T = self.channels, PERIOD
        params = {}
        for part, enabled in (("mean", self.shift_means), ("std", self.shift_stds)):
            if not enabled:
                continue
            if self.variant == "affine":
                params[f"scale_{part}"] = ge.param(np.ones((T, c)), f"shift.scale_{part}")
            else:
                params[f"mix_{part}"] = ge.param(np.eye(T), f"shift.mix_{part}")
            params[f"bias_{part}"] = ge.param(np.zeros((T, c)), f"shift.bias_{part}")
        self._params = params

    def params(self):
        return dict(self._params)

    def _apply(self, x, part):
        p = self._params
        if self.variant == "affine":
            return ge.add(ge.elementwise_mul(p[f"scale_{part}"], x), p[f"bias_{part}"])
        return ge.add(ge.matmul(p[f"mix_{part}"], x), p[f"bias_{part}"])

    def apply(self, means, stds):
        """
        Graph form of the shift.

        Args:
            means, stds: Nodes (T, c) or (B, T, c)

        Returns:
            (means', stds') Nodes with stds' >= SIGMA_FLOOR
        """
        means, stds = ge.as_node(means), ge.as_node(stds)
        for node in (means, stds):
            if node.shape[-2:] != (PERIOD, self.channels):
                raise ShapeError(
                    f"Shift expects (..., {PERIOD}, {self.channels}) statistics, got {node.shape}"
                )
        if self.shift_means:
            means = self._apply(means, "mean")
        if self.shift_stds:
            stds = ge.clamp_min(self._apply(stds, "std"), SIGMA_FLOOR)
        return means, stds


def shift_stats(stats, params):
    """Array form of stage 2: PhaseStats -> shifted PhaseStats."""
    means, stds = params.apply(stats.means, stats.stds)
    return PhaseStats(means.value, stds.value, stats.anchor_phase, stats.window_length)


def denormalize_nodes(y, means, stds, forecast_anchor):
    """
    Graph form of stage 3: Y[r] = Y'[r] * sigma'[phase(r)] + mu'[phase(r)].

    Args:
        y: Node (M, c) or (B, M, c)
        means, stds: Nodes (T, c) or (B, T, c)
        forecast_anchor: Hour-of-day of the first forecast row (int or (B,))
    """
    y = ge.as_node(y)
    idx = phase_index(forecast_anchor, y.shape[-2])
    mu = ge.gather_rows(means, idx)
    sigma = ge.gather_rows(stds, idx)
    return ge.add(ge.elementwise_mul(y, sigma), mu)


def denormalize(y, stats, forecast_anchor_phase):
    """
    Array form of stage 3.

    Args:
        y: Normalized forecast (M, c) or (B, M, c)
        stats: (Shifted) PhaseStats from the input window
        forecast_anchor_phase: Must equal (input anchor + N) mod 24

    Raises:
        AlignmentError: If the forecast does not continue the input's cycle.
    """
    if not np.array_equal(np.asarray(forecast_anchor_phase) % PERIOD, stats.forecast_anchor):
        raise AlignmentError(
            f"Forecast anchored at hour {forecast_anchor_phase}; input cycle continues at "
            f"{stats.forecast_anchor}"
        )
    return denormalize_nodes(y, stats.means, stats.stds, forecast_anchor_phase).value
