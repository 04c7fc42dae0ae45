"""Quantizers, training loop semantics, evaluation, entropy bound."""

import math

import numpy as np
import pytest

from pplab.compress import (
    AdditiveUniformNoise,
    CompressModel,
    NoQuantizer,
    Round,
    SoftCenters,
    TrainConfig,
    decode,
    encode,
    entropy_upper_bound,
    eval_rate_distortion,
    hard_quantize,
    load_model,
    loss_and_grads,
    quantize,
    round_half_away,
    save_model,
    train,
    train_no_data,
)
from pplab.densities import StudentT2D, UniformBox2D
from pplab.entropy import FactorizedDensity
from pplab.errors import ConfigError
from pplab.nn import init_mlp, make_rng


class TestQuantize:
    def test_round_half_away_from_zero(self):
        y = np.array([1.4, -0.5])
        np.testing.assert_array_equal(quantize(Round(), y), [1.0, -1.0])

    def test_noise_within_half(self):
        rng = make_rng(0)
        y = np.zeros(1000)
        q = quantize(AdditiveUniformNoise(), y, rng)
        assert np.all(np.abs(q) < 0.5)

    def test_soft_symmetric_point(self):
        mode = SoftCenters((-1.0, 1.0), s=1.0)
        np.testing.assert_allclose(quantize(mode, np.array([0.0])), [0.0], atol=1e-15)

    def test_soft_two_center_closed_form(self):
        # two centers {-1, 1}: yhat = tanh(2 s y)
        mode = SoftCenters((-1.0, 1.0), s=1.0)
        got = quantize(mode, np.array([0.5]))
        np.testing.assert_allclose(got, [np.tanh(1.0)], rtol=1e-12)

    def test_soft_hardens_to_nearest_center(self):
        # random grid keeps clear of the midpoints, where "nearest" is ambiguous
        mode = SoftCenters((-2.0, -1.0, 0.0, 1.0, 2.0), s=1e4)
        ys = make_rng(21).uniform(-2.4, 2.4, 200)
        soft = quantize(mode, ys)
        hard = hard_quantize(mode, ys)
        np.testing.assert_allclose(soft, hard, atol=1e-8)

    def test_hard_quantize_for_noise_mode_rounds(self):
        y = np.array([0.6, -1.49])
        np.testing.assert_array_equal(hard_quantize(AdditiveUniformNoise(), y), [1.0, -1.0])

    def test_no_quantizer_identity(self):
        y = np.array([0.123, -4.5])
        np.testing.assert_array_equal(quantize(NoQuantizer(), y), y)
        np.testing.assert_array_equal(hard_quantize(NoQuantizer(), y), y)

    def test_soft_centers_validated(self):
        with pytest.raises(ConfigError):
            SoftCenters((1.0,))
        with pytest.raises(ConfigError):
            SoftCenters((1.0, 0.5))


class TestEntropyUpperBound:
    def test_paper_configuration(self):
        bits, bpp = entropy_upper_bound(64, 64, 4, 64, 2)
        assert bits == 1024.0
        assert bpp == 0.25

    def test_five_centers(self):
        bits, bpp = entropy_upper_bound(64, 64, 4, 64, 5)
        np.testing.assert_allclose(bits, 1024.0 * math.log2(5.0), rtol=1e-12)
        np.testing.assert_allclose(bpp, bits / 4096.0, rtol=1e-12)

    def test_zero_channels(self):
        bits, bpp = entropy_upper_bound(64, 64, 4, 0, 2)
        assert bits == 0.0 and bpp == 0.0

    def test_needs_two_centers(self):
        with pytest.raises(ConfigError):
            entropy_upper_bound(64, 64, 4, 64, 1)


class TestEncodeDecode:
    def test_encode_deterministic_and_shaped(self):
        rng = make_rng(1)
        m = CompressModel(
            init_mlp([2, 8, 3], rng), init_mlp([3, 8, 2], rng), None, NoQuantizer()
        )
        x = rng.standard_normal((5, 2))
        y1, y2 = encode(m, x), encode(m, x)
        np.testing.assert_array_equal(y1, y2)
        assert y1.shape == (5, 3)

    def test_zero_weight_encoder_maps_to_zero(self):
        rng = make_rng(2)
        enc = init_mlp([2, 4, 3], rng)
        enc.weights = [np.zeros_like(w) for w in enc.weights]
        m = CompressModel(enc, init_mlp([3, 4, 2], rng), None, NoQuantizer())
        np.testing.assert_array_equal(encode(m, np.array([1.0, 2.0])), np.zeros(3))

    def test_latent_dim_mismatch_rejected(self):
        rng = make_rng(3)
        from pplab.errors import ShapeError

        with pytest.raises(ShapeError):
            CompressModel(init_mlp([2, 4, 3], rng), init_mlp([2, 4, 2], rng), None, Round())


def _tiny_cfg(**kw):
    base = dict(
        lam=10.0,
        data=StudentT2D(),
        encoder_dims=[2, 16, 2],
        steps=300,
        batch=64,
        seed=5,
        dtype="float64",
        checkpoint_every=100,
    )
    base.update(kw)
    return TrainConfig(**base)


class TestTrain:
    def test_determinism(self):
        m1, c1 = train(_tiny_cfg())
        m2, c2 = train(_tiny_cfg())
        for a, b in zip(m1.encoder.weights, m2.encoder.weights):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(m1.entropy.logits, m2.entropy.logits)
        assert c1.loss == c2.loss

    def test_matches_reference_path(self):
        """The buffered loop must equal the pure loss_and_grads/adam_step chain."""
        from pplab.nn import AdamState, adam_step, _adam_update

        cfg = _tiny_cfg(steps=25, batch=16, encoder_dims=[2, 8, 3])
        m_fast, _ = train(cfg)

        ss = np.random.SeedSequence(cfg.seed)
        r_init, r_data, r_noise = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3))
        enc = init_mlp(cfg.encoder_dims, r_init)
        dec = init_mlp(cfg.decoder_dims, r_init)
        ent = FactorizedDensity.uniform(3, cfg.entropy_halfwidth, cfg.entropy_bins)
        st_e, st_d = AdamState.for_params(enc, cfg.lr), AdamState.for_params(dec, cfg.lr)
        m_log, v_log = np.zeros_like(ent.logits), np.zeros_like(ent.logits)
        for step in range(1, cfg.steps + 1):
            x = cfg.data.sample(cfg.batch, r_data)
            noise = r_noise.random(size=(cfg.batch, 3), dtype=np.float64) - 0.5
            _, (ge, gd, gl), _ = loss_and_grads(enc, dec, ent, cfg, x, noise)
            enc, st_e = adam_step(enc, ge, st_e)
            dec, st_d = adam_step(dec, gd, st_d)
            logits, m_log, v_log = _adam_update(ent.logits, gl, m_log, v_log, cfg.lr, 0.9, 0.999, 1e-8, step)
            ent = FactorizedDensity(logits, ent.halfwidth)
        for a, b in zip(m_fast.encoder.weights + m_fast.decoder.weights, enc.weights + dec.weights):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
        np.testing.assert_allclose(m_fast.entropy.logits, ent.logits, atol=1e-14)

    def test_prob_weighting_with_unit_density_matches_plain(self):
        # pdf == 1 everywhere on a unit-area box, so L2 degenerates to L1
        box = UniformBox2D((0.0, 0.0), (1.0, 1.0))
        m1, c1 = train(_tiny_cfg(data=box, loss_variant="plain"))
        m2, c2 = train(_tiny_cfg(data=box, loss_variant="prob_weighted", weight_density=box))
        for a, b in zip(m1.encoder.weights, m2.encoder.weights):
            np.testing.assert_array_equal(a, b)
        assert c1.loss == c2.loss

    def test_no_data_weighted_unit_box_matches_plain_curve(self):
        # constant weight pdf**0.1 == 1: identical loss at every checkpoint
        box = UniformBox2D((0.0, 0.0), (1.0, 1.0))
        _, c_plain = train(_tiny_cfg(data=box, loss_variant="plain"))
        _, c_nd = train_no_data(_tiny_cfg(data=box, weight_density=box))
        np.testing.assert_allclose(c_nd.loss, c_plain.loss, rtol=1e-9)

    def test_low_lambda_collapses_rate(self):
        d = StudentT2D()
        cfg = _tiny_cfg(lam=1e-6, steps=10_000, batch=256, dtype="float32")
        m, _ = train(cfg)
        bpp, _ = eval_rate_distortion(m, d.sample(1000, make_rng(8)))
        assert bpp <= 0.5

    def test_rate_distortion_tradeoff_direction(self):
        d = StudentT2D()
        test = d.sample(1000, make_rng(9))
        m_low, _ = train(_tiny_cfg(lam=1e-6, steps=5000, batch=256, dtype="float32"))
        m_high, _ = train(_tiny_cfg(lam=1e4, steps=5000, batch=256, dtype="float32"))
        _, d_low = eval_rate_distortion(m_low, test)
        _, d_high = eval_rate_distortion(m_high, test)
        assert d_high < d_low

    def test_divergence_carries_step(self):
        from pplab.errors import TrainingDiverged

        class ExplodingData:
            def sample(self, n, rng):
                return np.full((n, 2), 1e300)

        cfg = _tiny_cfg(data=ExplodingData(), steps=50, batch=8)
        with pytest.raises(TrainingDiverged) as exc_info:
            train(cfg)
        assert 1 <= exc_info.value.step <= 50

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            _tiny_cfg(lam=0.0)
        with pytest.raises(ConfigError):
            _tiny_cfg(loss_variant="bogus")
        with pytest.raises(ConfigError):
            _tiny_cfg(distortion="msssim")  # patch_shape missing
        with pytest.raises(ConfigError):
            _tiny_cfg(quantizer=Round())


class TestJointGradient:
    @pytest.mark.parametrize("variant", ["plain", "prob_weighted", "no_data_weighted"])
    @pytest.mark.parametrize("trial", range(7))
    def test_total_loss_gradient_matches_fd(self, variant, trial):
        rng = make_rng(900 + trial)
        d = StudentT2D()
        cfg = _tiny_cfg(
            lam=3.0,
            encoder_dims=[2, 5, 3],
            loss_variant=variant,
            weight_density=d if variant != "plain" else None,
        )
        enc = init_mlp([2, 5, 3], rng)
        dec = init_mlp([3, 5, 2], rng)
        ent = FactorizedDensity.uniform(3)
        ent.logits = 0.4 * rng.standard_normal((3, 120))
        x = d.sample(6, rng)
        noise = rng.uniform(-0.5, 0.5, (6, 3))
        _, (ge, gd, gl), _ = loss_and_grads(enc, dec, ent, cfg, x, noise)

        def total(e, dc, en):
            val, _, _ = loss_and_grads(e, dc, en, cfg, x, noise)
            return val

        h = 1e-6
        checks = []
        for li, i, j in [(0, 3, 1), (1, 1, 4)]:
            ep, em = enc.copy(), enc.copy()
            ep.weights[li][i, j] += h
            em.weights[li][i, j] -= h
            fd = (total(ep, dec, ent) - total(em, dec, ent)) / (2 * h)
            checks.append((fd, ge[0][li][i, j]))
        dp, dm = dec.copy(), dec.copy()
        dp.biases[0][2] += h
        dm.biases[0][2] -= h
        fd = (total(enc, dp, ent) - total(enc, dm, ent)) / (2 * h)
        checks.append((fd, gd[1][0][2]))
        entp, entm = ent.copy(), ent.copy()
        entp.logits[2, 61] += h
        entm.logits[2, 61] -= h
        fd = (total(enc, dec, entp) - total(enc, dec, entm)) / (2 * h)
        checks.append((fd, gl[2, 61]))
        for fd, got in checks:
            assert abs(fd - got) <= 1e-3 * max(abs(fd), 1e-6)


class TestPerceptualDistortionTraining:
    @pytest.mark.parametrize("kind", ["msssim", "nlpd"])
    def test_patch_loss_gradient_matches_fd(self, kind):
        from pplab.experiments.patchdata import UniformPatches

        rng = make_rng(77)
        cfg = TrainConfig(
            lam=1.0,
            data=UniformPatches(16, 16),
            encoder_dims=[256, 32, 8],
            distortion=kind,
            patch_shape=(16, 16),
            quantizer=SoftCenters((-1.0, 1.0)),
            steps=1,
            batch=2,
            seed=0,
            dtype="float64",
        )
        enc = init_mlp([256, 32, 8], rng)
        dec = init_mlp([8, 32, 256], rng)
        x = rng.random((2, 256))
        _, (ge, gd, _), _ = loss_and_grads(enc, dec, None, cfg, x, None)
        h = 1e-6
        for li, i, j in [(0, 5, 100), (1, 3, 17)]:
            ep, em = enc.copy(), enc.copy()
            ep.weights[li][i, j] += h
            em.weights[li][i, j] -= h
            lp, _, _ = loss_and_grads(ep, dec, None, cfg, x, None)
            lm, _, _ = loss_and_grads(em, dec, None, cfg, x, None)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - ge[0][li][i, j]) <= 1e-3 * max(abs(fd), 1e-7)


class TestEval:
    def test_perfect_reconstruction_zero_distortion(self):
        rng = make_rng(11)
        eye = init_mlp([2, 2], rng)
        eye.weights = [np.eye(2)]
        eye.biases = [np.zeros(2)]
        dec = init_mlp([2, 2], rng)
        dec.weights = [np.eye(2)]
        dec.biases = [np.zeros(2)]
        m = CompressModel(eye, dec, None, NoQuantizer())
        pts = rng.standard_normal((50, 2))
        _, dist = eval_rate_distortion(m, pts)
        assert dist == 0.0

    def test_rate_nonnegative(self, small_trained_model):
        pts = StudentT2D().sample(500, make_rng(12))
        bpp, _ = eval_rate_distortion(small_trained_model, pts)
        assert bpp >= 0.0

    def test_half_mass_bin_bpp(self):
        # two latent dims, each rounding into a bin of mass 1/2 -> 1 bpp over 2 signal dims
        rng = make_rng(13)
        enc = init_mlp([2, 2], rng)
        enc.weights = [np.zeros((2, 2))]
        enc.biases = [np.zeros(2)]  # latent always (0, 0)
        dec = init_mlp([2, 2], rng)
        ent = FactorizedDensity.uniform(2)
        logits = np.full((2, 120), -300.0)
        logits[:, 59] = np.log(0.25)
        logits[:, 60] = np.log(0.25)
        logits[:, 61] = np.log(0.5)  # mass 1/2 on (-0.5, 0.5), rest on [0.5, 1)
        ent.logits = logits
        m = CompressModel(enc, dec, ent, Round())
        bpp, _ = eval_rate_distortion(m, rng.standard_normal((10, 2)))
        np.testing.assert_allclose(bpp, 1.0, rtol=1e-9)

    def test_empty_test_set_rejected(self, small_trained_model):
        with pytest.raises(ValueError):
            eval_rate_distortion(small_trained_model, np.zeros((0, 2)))


class TestModelSerialization:
    def test_round_trip(self, tmp_path, small_trained_model):
        path = tmp_path / "model.json"
        save_model(path, small_trained_model)
        loaded = load_model(path)
        for a, b in zip(loaded.encoder.weights, small_trained_model.encoder.weights):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(loaded.entropy.logits, small_trained_model.entropy.logits)
        assert loaded.meta["lambda"] == small_trained_model.meta["lambda"]
        pts = StudentT2D().sample(100, make_rng(14))
        np.testing.assert_array_equal(encode(loaded, pts), encode(small_trained_model, pts))
