"""Tests for paradigm pipelines, the peak decoder and the hybrid loss."""

import numpy as np
import pytest

from seq2peak.analysis.gradcheck import check_pipeline
from seq2peak.analysis.training import TrainConfig, train
from seq2peak.core import gradengine as ge
from seq2peak.core.paradigms import Paradigm, build_pipeline, hybrid_loss, peak_decode
from seq2peak.core.windows import SyntheticSpec, extract_peak, gen_synthetic, make_windows
from seq2peak.utils.validators import ConfigurationError, ParameterError, ShapeError


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class TestPeakDecode:

    def test_value_equals_extract_peak(self, rng):
        """The decoder is value-identical to daily max extraction."""
        for _ in range(1000):
            m = int(rng.choice([24, 48, 120]))
            c = int(rng.choice([1, 7]))
            y = rng.normal(size=(m, c))
            np.testing.assert_array_equal(peak_decode(ge.const(y)).value, extract_peak(y))

    def test_constant(self):
        """Constant forecasts have constant peaks."""
        np.testing.assert_array_equal(peak_decode(np.full((48, 2), 1.5)).value, 1.5)

    def test_indivisible(self):
        """M must be whole days."""
        with pytest.raises(ShapeError):
            peak_decode(np.zeros((36, 1)))


class TestHybridLoss:

    def setup_method(self):
        rng = np.random.default_rng(1)
        self.y_hat = rng.normal(size=(2, 48, 3))
        self.y = rng.normal(size=(2, 48, 3))
        self.p_hat = extract_peak(self.y_hat)
        self.p = extract_peak(self.y)
        self.l_seq = float(np.mean((self.y_hat - self.y) ** 2))
        self.l_peak = float(np.mean((self.p_hat - self.p) ** 2))

    def loss(self, alpha):
        return float(hybrid_loss(self.y_hat, self.y, self.p_hat, self.p, alpha).value)

    def test_endpoints_exact(self):
        """alpha = 1 is exactly the sequence loss, alpha = 0 exactly the peak loss."""
        assert self.loss(1.0) == self.l_seq
        assert self.loss(0.0) == self.l_peak

    def test_affine_in_alpha(self):
        """The blend is linear in alpha with slope l_seq - l_peak."""
        for alpha in (0.25, 0.5, 0.8):
            expected = self.l_peak + alpha * (self.l_seq - self.l_peak)
            assert self.loss(alpha) == pytest.approx(expected, rel=1e-12)

    def test_perfect_forecast(self):
        """Zero residuals give zero loss for any alpha."""
        for alpha in (0.0, 0.3, 1.0):
            assert float(hybrid_loss(self.y, self.y, self.p, self.p, alpha).value) == 0.0

    def test_alpha_out_of_range(self):
        """alpha outside [0, 1] is a parameter error."""
        with pytest.raises(ParameterError):
            hybrid_loss(self.y_hat, self.y, self.p_hat, self.p, 1.5)


class TestBuildPipeline:

    def test_alpha_only_for_seq2peak(self):
        """Supplying alpha to another paradigm is a configuration error."""
        with pytest.raises(ConfigurationError, match="alpha"):
            build_pipeline("sfs", 48, 24, 1, alpha=0.5)

    def test_default_alpha(self):
        """seq2peak defaults to alpha = 0.5."""
        assert build_pipeline("seq2peak", 48, 24, 1).alpha == 0.5

    @pytest.mark.parametrize("kind", ["pfp", "sfp"])
    def test_cyclicnorm_not_for_peak_paradigms(self, kind):
        """Direct peak paradigms cannot use CyclicNorm."""
        with pytest.raises(ConfigurationError, match="CyclicNorm"):
            build_pipeline(kind, 720, 120, 1, cyclicnorm={"enabled": True})

    def test_unknown_paradigm(self):
        """Unknown paradigm names fail."""
        with pytest.raises(ConfigurationError):
            build_pipeline("s2s", 48, 24, 1)

    def test_partial_days(self):
        """N and M must be whole days."""
        with pytest.raises(ConfigurationError):
            build_pipeline("sfs", 50, 24, 1)

    def test_shapes_per_paradigm(self, rng):
        """Each paradigm wires the right input and output lengths."""
        X = rng.normal(size=(4, 720, 2))
        phases = np.zeros(4, dtype=int)
        pfp = build_pipeline("pfp", 720, 120, 2)
        assert (pfp.forecaster.n_in, pfp.forecaster.n_out) == (30, 5)
        sfp = build_pipeline("sfp", 720, 120, 2)
        assert (sfp.forecaster.n_in, sfp.forecaster.n_out) == (720, 5)
        for kind in ("sfs", "seq2peak"):
            pipe = build_pipeline(kind, 720, 120, 2)
            assert pipe.forecaster.n_out == 120
            result = pipe.forward(X, phases)
            assert result.y_hat.shape == (4, 120, 2)
            assert result.peak_hat.shape == (4, 5, 2)
        assert pfp.predict(X, phases).shape == (4, 5, 2)
        assert sfp.predict(X, phases).shape == (4, 5, 2)

    def test_default_shift_for_mlp(self):
        """Without an explicit variant the MLP gets the affine shift."""
        pipe = build_pipeline("seq2peak", 48, 24, 1, model="mlp", cyclicnorm={"enabled": True})
        assert pipe.shift.variant == "affine"
        assert Paradigm.parse("SEQ2PEAK") is Paradigm.SEQ2PEAK

    def test_sfs_peaks_have_no_gradient(self, rng):
        """The post-hoc max of SFS is a constant in the graph."""
        pipe = build_pipeline("sfs", 48, 24, 1)
        result = pipe.forward(rng.normal(size=(48, 1)), 0)
        assert not result.peak_hat.requires_grad
        assert result.y_hat.requires_grad

    def test_state_dict_round_trip(self):
        """Loading a state restores values; mismatched keys fail."""
        a = build_pipeline("seq2peak", 48, 24, 1, cyclicnorm={"enabled": True, "shift": "affine"}, seed=1)
        b = build_pipeline("seq2peak", 48, 24, 1, cyclicnorm={"enabled": True, "shift": "affine"}, seed=2)
        b.load_state_dict(a.state_dict())
        for name, value in a.state_dict().items():
            np.testing.assert_array_equal(b.state_dict()[name], value)
        with pytest.raises(ConfigurationError):
            b.load_state_dict({"model.W": a.state_dict()["model.W"]})


class TestEquivalence:

    def test_seq2peak_alpha_one_matches_sfs(self):
        """With alpha = 1 and identity shift, seq2peak trains bit-identically to SFS."""
        frame = gen_synthetic(SyntheticSpec(length=24 * 30, seed=2))
        train_w = make_windows(frame.slice(0, 480), 96, 48, stride=6)
        val_w = make_windows(frame.slice(480, 720), 96, 48, stride=6)
        config = TrainConfig(max_epochs=3, batch_size=8, learning_rate=1e-2, seed=5)
        cn = {"enabled": True, "shift": "identity"}

        sfs = build_pipeline("sfs", 96, 48, 1, cyclicnorm=cn, seed=7)
        s2p = build_pipeline("seq2peak", 96, 48, 1, cyclicnorm=cn, alpha=1.0, seed=7)
        r_sfs = train(sfs, train_w, val_w, config)
        r_s2p = train(s2p, train_w, val_w, config)

        for name, value in sfs.state_dict().items():
            np.testing.assert_array_equal(s2p.state_dict()[name], value)
        np.testing.assert_array_equal(r_sfs.history["val_peak_mse"], r_s2p.history["val_peak_mse"])
        X, _, _, phases = val_w.batch(np.arange(len(val_w)))
        np.testing.assert_array_equal(sfs.predict(X, phases), s2p.predict(X, phases))


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("shift", ["affine", "linear"])
def test_hybrid_loss_gradients(alpha, seed, shift):
    """Model and shift parameters pass the finite-difference check for every alpha."""
    report = check_pipeline("linear", alpha=alpha, seed=seed, shift=shift, coords_per_param=20)
    assert report.passed, report.failures
