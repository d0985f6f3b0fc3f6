"""
Peak-hour forecasting paradigms.

    pfp       peak history -> peak forecast, peak MSE
    sfp       full history -> peak forecast, peak MSE
    sfs       full history -> full forecast, full MSE, post-hoc daily max
    seq2peak  full history -> full forecast -> maxpool decoder, hybrid loss

sfs and seq2peak may wrap the forecaster in CyclicNorm.
"""

import logging
from enum import Enum

import numpy as np

from ..utils.validators import PERIOD, ConfigurationError, ShapeError, validate_alpha
from . import cyclicnorm as cn
from . import gradengine as ge
from .models import build_forecaster
from .windows import extract_peak

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5
DEFAULT_SHIFT = {"persistence": "identity", "linear": "identity", "dlinear": "identity", "mlp": "affine"}


class Paradigm(str, Enum):
    PFP = "pfp"
    SFP = "sfp"
    SFS = "sfs"
    SEQ2PEAK = "seq2peak"

    @classmethod
    def parse(cls, kind):
        try:
            return cls(str(getattr(kind, "value", kind)).lower())
        except ValueError:
            raise ConfigurationError(
                f"Unknown paradigm '{kind}'. Use one of {[p.value for p in cls]}"
            ) from None


def peak_decode(y, period=PERIOD):
    """Differentiable daily max: maxpool with kernel = stride = 24."""
    return ge.maxpool_time(y, period)


def hybrid_loss(y_hat, y, peak_hat, peak, alpha):
    """
    alpha * MSE(full series) + (1 - alpha) * MSE(daily peaks).

    Args:
        y_hat, y: (..., M, c) forecast and truth
        peak_hat, peak: (..., M/24, c)
        alpha: Weight in [0, 1]

    Returns:
        Scalar Node
    """
    alpha = validate_alpha(alpha)
    return ge.scale_add(ge.mse(y_hat, y), alpha, ge.mse(peak_hat, peak), 1.0 - alpha)


class ForwardResult:
    """Graph outputs of one pipeline pass."""

    __slots__ = ("y_hat", "peak_hat")

    def __init__(self, y_hat, peak_hat):
        self.y_hat = y_hat
        self.peak_hat = peak_hat


class ParadigmPipeline:
    """
    A forecaster wired into one paradigm.

    Args:
        kind: Paradigm
        forecaster: Forecaster sized for the paradigm's input/output rows
        input_hours, horizon_hours: N and M of the windows fed in
        shift: ShiftParams when CyclicNorm is enabled, else None
        alpha: Hybrid weight (seq2peak only)
    """

    def __init__(self, kind, forecaster, input_hours, horizon_hours, shift=None, alpha=None):
        self.kind = Paradigm.parse(kind)
        self.forecaster = forecaster
        self.input_hours = input_hours
        self.horizon_hours = horizon_hours
        self.shift = shift
        self.alpha = alpha

    @property
    def cyclicnorm(self):
        return self.shift is not None

    @property
    def horizon_days(self):
        return self.horizon_hours // PERIOD

    def params(self):
        """All trainable nodes keyed by node name, model first."""
        nodes = list(self.forecaster.params().values())
        if self.shift is not None:
            nodes += list(self.shift.params().values())
        return {node.name: node for node in nodes}

    def _check_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        expected = (self.input_hours, self.forecaster.channels)
        if X.shape[-2:] != expected:
            raise ShapeError(f"Pipeline expects input (..., {expected[0]}, {expected[1]}), got {X.shape}")
        return X

    def forward(self, X, phases):
        """
        Build the forward graph for a window or a batch.

        Args:
            X: (N, c) or (B, N, c) on the standardized scale
            phases: Hour-of-day of each window's first row (int or (B,))

        Returns:
            ForwardResult; ``y_hat`` is None for pfp/sfp
        """
        X = self._check_batch(X)

        if self.kind is Paradigm.PFP:
            return ForwardResult(None, self.forecaster(ge.const(extract_peak(X))))
        if self.kind is Paradigm.SFP:
            return ForwardResult(None, self.forecaster(ge.const(X)))

        if self.shift is None:
            y_hat = self.forecaster(ge.const(X))
        else:
            stats = cn.compute_phase_stats(X, phases)
            x_norm = cn.normalize(X, stats)
            y_norm = self.forecaster(ge.const(x_norm))
            means, stds = self.shift.apply(stats.means, stats.stds)
            y_hat = cn.denormalize_nodes(y_norm, means, stds, stats.forecast_anchor)

        if self.kind is Paradigm.SFS:
            # Post-hoc max; no gradient reaches the model through the peaks
            return ForwardResult(y_hat, ge.const(extract_peak(y_hat.value)))
        return ForwardResult(y_hat, peak_decode(y_hat))

    def loss(self, result, Y, Y_peak):
        """Training objective of the paradigm on the standardized scale."""
        if self.kind in (Paradigm.PFP, Paradigm.SFP):
            return ge.mse(result.peak_hat, Y_peak)
        if self.kind is Paradigm.SFS:
            return ge.mse(result.y_hat, Y)
        return hybrid_loss(result.y_hat, Y, result.peak_hat, Y_peak, self.alpha)

    def predict(self, X, phases):
        """Peak forecast array (..., M/24, c)."""
        return self.forward(X, phases).peak_hat.value

    def state_dict(self):
        return {name: node.value.copy() for name, node in self.params().items()}

    def load_state_dict(self, state):
        params = self.params()
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ConfigurationError(f"State mismatch: missing {missing}, unexpected {extra}")
        for name, node in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != node.value.shape:
                raise ShapeError(f"{name}: stored shape {value.shape}, expected {node.value.shape}")
            node.value[...] = value


def build_pipeline(kind, input_hours, horizon_hours, channels, model="linear", model_args=None,
                   cyclicnorm=None, alpha=None, seed=0):
    """
    Assemble a paradigm pipeline.

    Args:
        kind: 'pfp', 'sfp', 'sfs' or 'seq2peak'
        input_hours, horizon_hours: N and M in hours (multiples of 24)
        channels: Channel count
        model: Forecaster name
        model_args: Forecaster hyperparameters
        cyclicnorm: None/False, or a mapping with 'enabled', 'shift',
            'shift_means', 'shift_stds' (sfs and seq2peak only)
        alpha: Hybrid weight; seq2peak only, default 0.5
        seed: Initialization seed

    Raises:
        ConfigurationError: On alpha for a non-seq2peak paradigm, CyclicNorm on
            pfp/sfp, or lengths that are not whole days.
    """
    kind = Paradigm.parse(kind)
    if input_hours <= 0 or input_hours % PERIOD or horizon_hours <= 0 or horizon_hours % PERIOD:
        raise ConfigurationError(
            f"N={input_hours} and M={horizon_hours} must be positive multiples of {PERIOD}"
        )

    if kind is Paradigm.SEQ2PEAK:
        alpha = validate_alpha(DEFAULT_ALPHA if alpha is None else alpha)
    elif alpha is not None:
        raise ConfigurationError(f"alpha applies to seq2peak only, got alpha={alpha} for {kind.value}")

    cn_args = dict(cyclicnorm or {})
    enabled = bool(cn_args.pop("enabled", bool(cn_args)))
    if enabled and kind in (Paradigm.PFP, Paradigm.SFP):
        raise ConfigurationError(f"CyclicNorm applies to sfs and seq2peak only, not {kind.value}")

    n_in = input_hours // PERIOD if kind is Paradigm.PFP else input_hours
    n_out = horizon_hours if kind in (Paradigm.SFS, Paradigm.SEQ2PEAK) else horizon_hours // PERIOD
    forecaster = build_forecaster(model, n_in, n_out, channels, seed=seed, **(model_args or {}))

    shift = None
    if enabled:
        variant = cn_args.pop("shift", None) or DEFAULT_SHIFT.get(model, "identity")
        unknown = set(cn_args) - {"shift_means", "shift_stds"}
        if unknown:
            raise ConfigurationError(f"Unknown cyclicnorm keys: {sorted(unknown)}")
        shift = cn.ShiftParams(variant, channels, **cn_args)

    logger.debug(
        "Built %s pipeline: model=%s N=%d M=%d c=%d cyclicnorm=%s alpha=%s",
        kind.value, model, n_in, n_out, channels, shift.variant if shift else None, alpha
    )
    return ParadigmPipeline(kind, forecaster, input_hours, horizon_hours, shift, alpha)
