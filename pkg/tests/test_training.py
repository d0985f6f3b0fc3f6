"""Tests for optimizers, the training loop and evaluation."""

import numpy as np
import pandas as pd
import pytest

from seq2peak.analysis.training import (
    SGD,
    Adam,
    EvalReport,
    HorizonMetrics,
    TrainConfig,
    evaluate,
    forecast_traces,
    peak_mse,
    train,
)
from seq2peak.core import gradengine as ge
from seq2peak.core.paradigms import build_pipeline
from seq2peak.core.windows import SyntheticSpec, gen_synthetic, make_windows, standardize
from seq2peak.utils.data_loader import TimeSeriesFrame
from seq2peak.utils.validators import ConfigurationError, DivergenceError


@pytest.fixture(scope="module")
def splits():
    frame = gen_synthetic(SyntheticSpec(length=24 * 40, channels=2, seed=1))
    raw = (frame.slice(0, 480), frame.slice(480, 720), frame.slice(720, 960))
    train_std, others, stats = standardize(raw[0], raw[1:])
    std = (train_std, *others)
    windows = [make_windows(f, 96, 48, stride=s, raw_values=r.values)
               for f, r, s in zip(std, raw, (4, 6, 6))]
    return windows, stats


class TestTrainConfig:

    def test_defaults(self):
        """Defaults are Adam, lr 1e-3, batch 32, 100 epochs, patience 10."""
        c = TrainConfig()
        assert (c.optimizer, c.learning_rate, c.batch_size, c.max_epochs, c.patience) == \
            ("adam", 1e-3, 32, 100, 10)

    @pytest.mark.parametrize("kwargs", [
        {"learning_rate": 0.0}, {"batch_size": 0}, {"patience": 0},
        {"optimizer": "rmsprop"}, {"betas": (0.9, 1.0)}, {"max_epochs": -1},
    ])
    def test_invalid(self, kwargs):
        """Out-of-range settings are configuration errors."""
        with pytest.raises(ConfigurationError):
            TrainConfig(**kwargs)


class TestOptimizers:

    def test_adam_zero_gradient(self):
        """A zero gradient leaves parameters unchanged."""
        p = ge.param(np.array([1.0, -2.0]), "p")
        opt = Adam({"p": p}, 0.1)
        opt.step({"p": np.zeros(2)})
        np.testing.assert_array_equal(p.value, [1.0, -2.0])

    def test_adam_first_step(self):
        """The bias-corrected first step moves each coordinate by about lr against the gradient."""
        p = ge.param(np.array([1.0, 1.0]), "p")
        Adam({"p": p}, 0.1).step({"p": np.array([3.0, -0.5])})
        np.testing.assert_allclose(p.value, [0.9, 1.1], rtol=1e-6)

    def test_adam_state_allocated_up_front(self):
        """Moment buffers exist for every parameter before the first step."""
        params = {"p": ge.param(np.ones((2, 3)), "p"), "q": ge.param(np.zeros(4), "q")}
        opt = Adam(params, 0.1)
        assert opt.t == 0
        assert set(opt.m) == set(opt.v) == {"p", "q"}
        assert opt.m["p"].shape == (2, 3) and opt.v["q"].shape == (4,)
        assert not np.any(opt.m["p"]) and not np.any(opt.v["q"])

    def test_sgd(self):
        """SGD subtracts lr times the gradient; absent gradients are skipped."""
        p = ge.param(np.array([1.0]), "p")
        q = ge.param(np.array([5.0]), "q")
        SGD({"p": p, "q": q}, 0.5).step({"p": np.array([2.0])})
        assert p.value[0] == 0.0
        assert q.value[0] == 5.0


class TestTrain:

    def test_zero_epochs(self, splits):
        """max_epochs = 0 leaves parameters untouched."""
        (tr, va, _), _ = splits
        pipe = build_pipeline("seq2peak", 96, 48, 2, seed=0)
        before = pipe.state_dict()
        result = train(pipe, tr, va, TrainConfig(max_epochs=0))
        for name, value in before.items():
            np.testing.assert_array_equal(pipe.state_dict()[name], value)
        assert len(result.history) == 1

    def test_deterministic(self, splits):
        """The same seeds reproduce parameters bit-identically."""
        (tr, va, _), _ = splits
        config = TrainConfig(max_epochs=3, batch_size=16, learning_rate=1e-2, seed=3)
        states = []
        for _ in range(2):
            pipe = build_pipeline("seq2peak", 96, 48, 2, model="dlinear",
                                  cyclicnorm={"enabled": True, "shift": "affine"}, seed=1)
            train(pipe, tr, va, config)
            states.append(pipe.state_dict())
        for name in states[0]:
            np.testing.assert_array_equal(states[0][name], states[1][name])

    def test_restores_best(self, splits):
        """The returned parameters achieve the best validation peak MSE seen."""
        (tr, va, _), _ = splits
        pipe = build_pipeline("sfs", 96, 48, 2, seed=0)
        result = train(pipe, tr, va, TrainConfig(max_epochs=8, learning_rate=1e-2,
                                                 batch_size=16, patience=2))
        assert result.best_val_peak_mse == result.history["val_peak_mse"].min()
        assert peak_mse(pipe, va) == pytest.approx(result.best_val_peak_mse, rel=1e-12)
        assert result.best_val_peak_mse < result.history["val_peak_mse"].iloc[0]

    def test_noiseless_fit(self):
        """A linear sfs pipeline fits a noiseless daily cycle to validation peak MSE below 1e-4."""
        frame = gen_synthetic(SyntheticSpec(length=24 * 40, channels=1, noise_std=0.0,
                                            peak_jitter_std=0.0, seed=1))
        raw = (frame.slice(0, 480), frame.slice(480, 720), frame.slice(720, 960))
        train_std, others, _ = standardize(raw[0], raw[1:])
        tr = make_windows(train_std, 96, 48, stride=4)
        va = make_windows(others[0], 96, 48, stride=6)
        config = TrainConfig(optimizer="sgd", learning_rate=0.2, max_epochs=200, patience=200,
                             batch_size=32)
        result = train(build_pipeline("sfs", 96, 48, 1, seed=0), tr, va, config)
        assert result.best_val_peak_mse < 1e-4

    def test_early_stop(self, splits):
        """Training stops once validation stalls for ``patience`` epochs."""
        (tr, va, _), _ = splits
        pipe = build_pipeline("sfs", 96, 48, 2, seed=0)
        # Steps this small vanish below float resolution, so validation never improves
        result = train(pipe, tr, va, TrainConfig(max_epochs=50, learning_rate=1e-300,
                                                 optimizer="sgd", patience=1))
        assert result.epochs_run == 1
        assert result.best_epoch == 0

    def test_divergence(self, splits):
        """A NaN training loss aborts with the epoch named."""
        (_, va, _), _ = splits
        values = np.full((300, 2), np.nan)
        bad = TimeSeriesFrame(pd.date_range("2020", periods=300, freq="h"), values, ("a", "b"))
        pipe = build_pipeline("sfs", 96, 48, 2)
        with pytest.raises(DivergenceError, match="epoch 1"):
            train(pipe, make_windows(bad, 96, 48, stride=12), va, TrainConfig(max_epochs=2))

    def test_no_parameters(self, splits):
        """Persistence pipelines skip optimization."""
        (tr, va, _), _ = splits
        pipe = build_pipeline("sfs", 96, 48, 2, model="persistence")
        result = train(pipe, tr, va, TrainConfig(max_epochs=5))
        assert result.epochs_run == 0


class TestEvaluate:

    def test_zero_predictor(self, splits):
        """A zero forecast scores the mean squared peak."""
        (_, _, te), _ = splits
        pipe = build_pipeline("sfs", 96, 48, 2)
        for node in pipe.params().values():
            node.value[...] = 0.0
        report = evaluate(pipe, te, [1, 2])
        assert report.rows[0].mse == pytest.approx(np.mean(te.Y_peak[:, :1] ** 2))
        assert report.rows[1].mse == pytest.approx(np.mean(te.Y_peak ** 2))
        assert report.rows[1].mae == pytest.approx(np.mean(np.abs(te.Y_peak)))

    def test_avg_is_row_mean(self, splits):
        """Avg equals the arithmetic mean of the horizon rows."""
        (_, _, te), _ = splits
        report = evaluate(build_pipeline("sfs", 96, 48, 2, seed=2), te, [1, 2])
        assert report.avg["mse"] == np.mean([r.mse for r in report.rows])
        frame = report.to_frame()
        assert frame["horizon"].tolist() == [1, 2, "Avg"]

    def test_raw_scale(self, splits):
        """Raw-unit errors are standardized errors scaled by the channel std."""
        (_, _, te), stats = splits
        pipe = build_pipeline("sfs", 96, 48, 2, seed=2)
        report = evaluate(pipe, te, [2], channel_stats=stats)
        pred = np.concatenate([pipe.predict(*te.batch([i])[::3]) for i in range(len(te))])
        err_raw = (pred - te.Y_peak) * stats.std
        assert report.rows[0].mse_raw == pytest.approx(np.mean(err_raw ** 2), rel=1e-9)

    def test_horizon_too_long(self, splits):
        """Horizons beyond the trained forecast fail."""
        (_, _, te), _ = splits
        with pytest.raises(ConfigurationError):
            evaluate(build_pipeline("sfs", 96, 48, 2), te, [3])

    def test_report_without_raw(self):
        """Raw metrics default to NaN when not computed."""
        report = EvalReport([HorizonMetrics(5, 0.2, 0.3), HorizonMetrics(10, 0.4, 0.5)])
        assert report.avg["mse"] == pytest.approx(0.3)
        assert np.isnan(report.avg["mse_raw"])

    def test_traces(self, splits):
        """One trace row per window, day and channel."""
        (_, _, te), _ = splits
        traces = forecast_traces(build_pipeline("sfs", 96, 48, 2), te)
        assert list(traces.columns) == ["window", "day", "channel", "y_true_peak", "y_pred_peak"]
        assert len(traces) == len(te) * 2 * 2
        assert set(traces["channel"]) == {"ch0", "ch1"}
        np.testing.assert_array_equal(traces["y_true_peak"].to_numpy(), te.Y_peak.reshape(-1))
