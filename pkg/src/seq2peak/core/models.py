"""
Forecasters: normalized history (N x c) -> normalized forecast (M x c).

Every model is built from gradengine ops; parameters are named
``model.<key>`` and enumerated in declaration order.
"""

from abc import ABC, abstractmethod

import numpy as np

from ..utils.validators import PERIOD, ConfigurationError, ShapeError
from . import gradengine as ge

MOVING_AVG_KERNEL = 25


class Forecaster(ABC):
    """
    Contract shared by all models.

    Args:
        n_in: Input rows N
        n_out: Output rows M
        channels: Channel count c
    """

    name = "base"

    def __init__(self, n_in, n_out, channels):
        if n_in < 1 or n_out < 1 or channels < 1:
            raise ConfigurationError(
                f"{self.name}: n_in, n_out and channels must be positive, "
                f"got ({n_in}, {n_out}, {channels})"
            )
        self.n_in = n_in
        self.n_out = n_out
        self.channels = channels
        self._params = {}

    def params(self):
        """Ordered mapping key -> parameter Node."""
        return dict(self._params)

    def _declare(self, key, value):
        self._params[key] = ge.param(value, f"model.{key}")

    def init(self, seed):
        """Deterministic (re)initialization."""
        self._params = {}
        self._init(np.random.default_rng(seed))

    def _init(self, rng):
        pass

    def __call__(self, x):
        x = ge.as_node(x)
        if x.shape[-2:] != (self.n_in, self.channels):
            raise ShapeError(
                f"{self.name}: expected input (..., {self.n_in}, {self.channels}), got {x.shape}"
            )
        return self.forward(x)

    @abstractmethod
    def forward(self, x):
        """Node (..., N, c) -> Node (..., M, c)."""


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class PersistenceForecaster(Forecaster):
    """Repeat the last day of the input across the horizon. No parameters."""

    name = "persistence"

    def __init__(self, n_in, n_out, channels):
        super().__init__(n_in, n_out, channels)
        if n_in < PERIOD:
            raise ConfigurationError(f"persistence needs N >= {PERIOD}, got {n_in}")

    def forward(self, x):
        index = (self.n_in - PERIOD) + np.arange(self.n_out) % PERIOD
        return ge.gather_rows(x, index)


class LinearForecaster(Forecaster):
    """Y'[:, j] = W X'[:, j] + b with W (M, N); per-channel W when ``individual``."""

    name = "linear"

    def __init__(self, n_in, n_out, channels, individual=False):
        super().__init__(n_in, n_out, channels)
        self.individual = individual

    def _weight_shape(self):
        base = (self.n_out, self.n_in)
        return (self.channels,) + base if self.individual else base

    def _bias_shape(self):
        return (self.channels, self.n_out) if self.individual else (self.n_out,)

    def _init(self, rng):
        self._declare("W", _uniform(rng, self.n_in, self._weight_shape()))
        self._declare("b", _uniform(rng, self.n_in, self._bias_shape()))

    def forward(self, x):
        return ge.affine(x, self._params["W"], self._params["b"])


class DLinearForecaster(LinearForecaster):
    """
    Trend/seasonal decomposition with one linear map per component.

    trend = moving_average(X', 25); seasonal = X' - trend;
    Y' = W_t trend + W_s seasonal + b.
    """

    name = "dlinear"

    def __init__(self, n_in, n_out, channels, individual=False, kernel=MOVING_AVG_KERNEL):
        super().__init__(n_in, n_out, channels, individual)
        if n_in < kernel:
            raise ConfigurationError(f"dlinear needs N >= kernel ({kernel}), got {n_in}")
        self.kernel = kernel

    def _init(self, rng):
        self._declare("W_trend", _uniform(rng, self.n_in, self._weight_shape()))
        self._declare("W_seasonal", _uniform(rng, self.n_in, self._weight_shape()))
        self._declare("b", _uniform(rng, self.n_in, self._bias_shape()))

    def decompose(self, x):
        trend = ge.moving_average(x, self.kernel)
        return trend, ge.scale_add(x, 1.0, trend, -1.0)

    def forward(self, x):
        p = self._params
        trend, seasonal = self.decompose(x)
        return ge.add(ge.affine(trend, p["W_trend"], p["b"]), ge.affine(seasonal, p["W_seasonal"]))


class MLPForecaster(Forecaster):
    """Per-channel affine(N -> H), tanh, affine(H -> M)."""

    name = "mlp"

    def __init__(self, n_in, n_out, channels, hidden=64):
        super().__init__(n_in, n_out, channels)
        if hidden < 1:
            raise ConfigurationError(f"mlp hidden width must be >= 1, got {hidden}")
        self.hidden = hidden

    def _init(self, rng):
        self._declare("W1", _uniform(rng, self.n_in, (self.hidden, self.n_in)))
        self._declare("b1", _uniform(rng, self.n_in, (self.hidden,)))
        self._declare("W2", _uniform(rng, self.hidden, (self.n_out, self.hidden)))
        self._declare("b2", _uniform(rng, self.hidden, (self.n_out,)))

    def forward(self, x):
        p = self._params
        h = ge.tanh(ge.affine(x, p["W1"], p["b1"]))
        return ge.affine(h, p["W2"], p["b2"])


MODELS = {
    "persistence": PersistenceForecaster,
    "linear": LinearForecaster,
    "dlinear": DLinearForecaster,
    "mlp": MLPForecaster,
}


def build_forecaster(name, n_in, n_out, channels, seed=0, **model_args):
    """
    Instantiate and seed a forecaster from the registry.

    Args:
        name: One of MODELS
        n_in, n_out, channels: Declared shapes
        seed: Initialization seed
        **model_args: Model hyperparameters (individual, kernel, hidden)
    """
    if name not in MODELS:
        raise ConfigurationError(f"Unknown model '{name}'. Use one of {sorted(MODELS)}")
    try:
        model = MODELS[name](n_in, n_out, channels, **model_args)
    except TypeError as e:
        raise ConfigurationError(f"Bad model_args for '{name}': {e}") from None
    model.init(seed)
    return model
