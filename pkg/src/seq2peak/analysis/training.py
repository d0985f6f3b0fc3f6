"""
Optimization loop and peak-series evaluation.

Training is single-threaded and deterministic given ``TrainConfig.seed``:
the shuffle order comes from one seeded generator and parameters are
initialized by the pipeline builder. Model selection uses validation peak MSE
for every paradigm.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core import gradengine as ge
from ..utils.validators import ConfigurationError, DivergenceError

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")
PREDICT_CHUNK = 256


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and stopping settings."""

    optimizer: str = "adam"
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"Unknown optimizer '{self.optimizer}'. Use one of {OPTIMIZERS}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigurationError(f"betas must be two values in [0, 1), got {self.betas}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ConfigurationError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")
        if self.stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {self.stride}")


class SGD:
    def __init__(self, params, learning_rate):
        self.params = params
        self.learning_rate = learning_rate

    def step(self, grads):
        for name, node in self.params.items():
            g = grads.get(name)
            if g is not None:
                node.value -= self.learning_rate * g


class Adam:
    """Adam with bias correction; moments are allocated per parameter at construction."""

    def __init__(self, params, learning_rate, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(node.value) for name, node in params.items()}
        self.v = {name: np.zeros_like(node.value) for name, node in params.items()}

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, node in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            node.value -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(params, config):
    if config.optimizer == "sgd":
        return SGD(params, config.learning_rate)
    return Adam(params, config.learning_rate, config.betas, config.eps)


def predict_windows(pipeline, windows, chunk=PREDICT_CHUNK):
    """Peak forecasts for every window, (S, M/24, c) on the standardized scale."""
    if len(windows) == 0:
        raise ConfigurationError("No windows to predict")
    out = []
    for start in range(0, len(windows), chunk):
        X, _, _, phases = windows.batch(np.arange(start, min(start + chunk, len(windows))))
        out.append(pipeline.predict(X, phases))
    return np.concatenate(out)


def peak_mse(pipeline, windows):
    pred = predict_windows(pipeline, windows)
    return float(np.mean((pred - windows.Y_peak) ** 2))


@dataclass
class TrainResult:
    pipeline: object
    history: pd.DataFrame
    best_epoch: int
    best_val_peak_mse: float
    epochs_run: int


def train(pipeline, train_windows, val_windows, config, progress=False):
    """
    Mini-batch training with early stopping on validation peak MSE.

    The initial parameters count as epoch 0, so the restored state is never
    worse on validation than the starting point.

    Args:
        pipeline: ParadigmPipeline (updated in place)
        train_windows, val_windows: WindowSet objects
        config: TrainConfig
        progress: Show a tqdm bar over epochs

    Returns:
        TrainResult with a per-epoch history (epoch, train_loss, val_peak_mse)

    Raises:
        DivergenceError: Non-finite training or validation loss.
    """
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise ConfigurationError("Training and validation splits need at least one window each")

    params = pipeline.params()
    best_val = peak_mse(pipeline, val_windows)
    if not np.isfinite(best_val):
        raise DivergenceError(0, best_val)
    best_state, best_epoch = pipeline.state_dict(), 0
    history = [{"epoch": 0, "train_loss": np.nan, "val_peak_mse": best_val}]

    if not params:
        logger.info("%s pipeline has no trainable parameters; skipping optimization", pipeline.kind.value)
        return TrainResult(pipeline, pd.DataFrame(history), 0, best_val, 0)

    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(params, config)
    n = len(train_windows)
    stale = 0
    epoch = 0

    bar = tqdm(range(1, config.max_epochs + 1), desc=f"  {pipeline.kind.value}", disable=not progress, leave=False)
    for epoch in bar:
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            X, Y, Y_peak, phases = train_windows.batch(idx)
            loss = pipeline.loss(pipeline.forward(X, phases), Y, Y_peak)
            value = float(loss.value)
            if not np.isfinite(value):
                raise DivergenceError(epoch, value)
            optimizer.step(ge.backward(loss))
            total += value * len(idx)

        val = peak_mse(pipeline, val_windows)
        if not np.isfinite(val):
            raise DivergenceError(epoch, val)
        history.append({"epoch": epoch, "train_loss": total / n, "val_peak_mse": val})
        logger.debug("epoch %d train=%.6g val_peak=%.6g", epoch, total / n, val)
        bar.set_postfix(val=f"{val:.4g}")

        if val < best_val:
            best_val, best_state, best_epoch, stale = val, pipeline.state_dict(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.debug("Early stop at epoch %d (best %d)", epoch, best_epoch)
                break

    pipeline.load_state_dict(best_state)
    return TrainResult(pipeline, pd.DataFrame(history), best_epoch, best_val, epoch)


@dataclass(frozen=True)
class HorizonMetrics:
    """Peak-series errors over the first ``horizon`` forecast days."""

    horizon: int
    mse: float
    mae: float
    mse_raw: float = float("nan")
    mae_raw: float = float("nan")


@dataclass
class EvalReport:
    """Per-horizon test metrics of one pipeline."""

    rows: list = field(default_factory=list)
    label: str = ""

    @property
    def avg(self):
        """Arithmetic mean of the horizon rows."""
        keys = ("mse", "mae", "mse_raw", "mae_raw")
        return {k: float(np.mean([getattr(r, k) for r in self.rows])) for k in keys}

    def to_frame(self):
        df = pd.DataFrame([asdict(r) for r in self.rows])
        avg = {"horizon": "Avg", **self.avg}
        df["horizon"] = df["horizon"].astype(object)
        return pd.concat([df, pd.DataFrame([avg])], ignore_index=True)

    def to_dict(self):
        return {
            "label": self.label,
            "horizons": [asdict(r) for r in self.rows],
            "avg": self.avg,
        }


def evaluate(pipeline, windows, horizons=None, channel_stats=None, label=""):
    """
    Test-set peak MSE/MAE on each requested horizon.

    A horizon of h days scores the first h forecast days of every window.
    Standardized-scale metrics are always reported; raw-unit metrics need
    ``channel_stats`` and windows built with ``raw_values``.

    Args:
        pipeline: Trained ParadigmPipeline
        windows: Test WindowSet
        horizons: Horizons in days (default: the pipeline's full horizon)
        channel_stats: ChannelStats used to standardize the data

    Raises:
        ConfigurationError: Empty test split or a horizon beyond the forecast.
    """
    if len(windows) == 0:
        raise ConfigurationError("Test split has no windows")
    horizons = list(horizons or [pipeline.horizon_days])
    for h in horizons:
        if not 1 <= h <= pipeline.horizon_days:
            raise ConfigurationError(
                f"Horizon {h} days outside 1..{pipeline.horizon_days} of the trained pipeline"
            )

    pred = predict_windows(pipeline, windows)
    truth = windows.Y_peak
    raw = channel_stats is not None and windows.Y_peak_raw is not None
    if raw:
        pred_raw = channel_stats.invert(pred)

    rows = []
    for h in horizons:
        err = pred[:, :h] - truth[:, :h]
        metrics = {"mse": float(np.mean(err ** 2)), "mae": float(np.mean(np.abs(err)))}
        if raw:
            err_raw = pred_raw[:, :h] - windows.Y_peak_raw[:, :h]
            metrics["mse_raw"] = float(np.mean(err_raw ** 2))
            metrics["mae_raw"] = float(np.mean(np.abs(err_raw)))
        rows.append(HorizonMetrics(h, **metrics))
    return EvalReport(rows, label)


def forecast_traces(pipeline, windows, channel_names=None):
    """
    Predicted and true daily peaks of every test window.

    Returns:
        DataFrame with columns window, day, channel, y_true_peak, y_pred_peak
    """
    pred = predict_windows(pipeline, windows)
    truth = windows.Y_peak
    s, d, c = pred.shape
    w, day, ch = np.indices((s, d, c)).reshape(3, -1)
    names = np.asarray(channel_names if channel_names is not None else windows.frame.channel_names)
    return pd.DataFrame({
        "window": w,
        "day": day,
        "channel": names[ch],
        "y_true_peak": truth.reshape(-1),
        "y_pred_peak": pred.reshape(-1),
    })
