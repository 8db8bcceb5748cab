import dataclasses

import numpy as np
import pytest

from softbitq import trainer, quantcore
from softbitq.config import default_config

SEED = 17


class TestDataset:
    def test_shapes_and_range(self, tiny_cfg, tiny_dataset):
        n_sub = 648 // tiny_cfg.k
        expected_rows = tiny_cfg.num_codewords * n_sub
        assert tiny_dataset.soft_bits.shape == (expected_rows, tiny_cfg.k)
        assert tiny_dataset.soft_bits.dtype == np.float32
        assert tiny_dataset.snr_db.shape == (expected_rows,)
        assert np.all(np.abs(tiny_dataset.soft_bits) <= 1.0)
        assert set(np.unique(tiny_dataset.snr_db)) <= set(tiny_cfg.snr_grid_db)

    def test_deterministic(self, tiny_cfg, code, tiny_dataset):
        rng = np.random.default_rng(np.random.SeedSequence([tiny_cfg.seed, 0xD0]))
        again = trainer.generate_training_set(tiny_cfg, code, rng)
        np.testing.assert_array_equal(again.soft_bits, tiny_dataset.soft_bits)

    def test_high_snr_rows_polarized(self, code):
        """At 30 dB average SNR most soft bits saturate toward +/- 1;
        the remainder sit on subcarriers in deep fades."""
        cfg = dataclasses.replace(default_config(6).train,
                                  num_codewords=30, snr_grid_db=(30.0,))
        rng = np.random.default_rng(SEED)
        ds = trainer.generate_training_set(cfg, code, rng)
        frac = np.mean(np.abs(ds.soft_bits) > 0.99)
        assert frac > 0.9
        assert np.median(np.abs(ds.soft_bits)) > 0.999


class TestDistortion:
    def test_zero_at_equality(self):
        lam = np.random.default_rng(SEED).uniform(-1, 1, (50, 4))
        assert trainer.distortion(lam, lam) == 0.0

    def test_weights_uncertain_bits_more(self):
        base = np.zeros((1, 1))
        err = np.full((1, 1), 0.1)
        confident = np.full((1, 1), 0.9)
        d_uncertain = trainer.distortion(base, base + err)
        d_confident = trainer.distortion(confident, confident + err)
        assert d_uncertain > d_confident

    def test_matches_formula(self):
        rng = np.random.default_rng(SEED)
        lam = rng.uniform(-1, 1, (8, 3))
        lam_hat = rng.uniform(-1, 1, (8, 3))
        eps = 1e-3
        expected = np.mean((lam - lam_hat) ** 2 / (np.abs(lam) + eps))
        np.testing.assert_allclose(trainer.distortion(lam, lam_hat, eps),
                                   expected, rtol=1e-12)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(SEED + 1)
        lam = rng.uniform(-1, 1, (6, 2))
        lam_hat = rng.uniform(-0.9, 0.9, (6, 2))
        _, grad = trainer._distortion_and_grad(lam.astype(np.float32),
                                               lam_hat.astype(np.float32), 1e-3)
        step = 1e-4
        for idx in [(0, 0), (3, 1), (5, 0)]:
            hp = lam_hat.copy()
            hp[idx] += step
            hi = trainer.distortion(lam, hp)
            hp[idx] -= 2 * step
            lo = trainer.distortion(lam, hp)
            np.testing.assert_allclose(grad[idx], (hi - lo) / (2 * step),
                                       rtol=1e-3, atol=1e-6)


class TestTraining:
    def test_loss_decreases(self, tiny_model):
        first = tiny_model.curve[0]["distortion"]
        last = tiny_model.curve[-1]["distortion"]
        assert last < first

    def test_curve_fields(self, tiny_cfg, tiny_model):
        assert len(tiny_model.curve) == tiny_cfg.epochs
        row = tiny_model.curve[-1]
        for field in ("epoch", "loss", "distortion", "soft_entropy_bits",
                      "hard_entropy_bits", "tau"):
            assert field in row
        # the soft estimate is a cross-entropy and may exceed 6 bits for
        # saturated latents; the hard plug-in entropy cannot
        assert row["soft_entropy_bits"] >= 0.0
        assert 0.0 <= row["hard_entropy_bits"] <= 6.0
        assert row["tau"] == pytest.approx(40.0 * 1.001 ** (tiny_cfg.epochs - 1))

    def test_deterministic(self, tiny_cfg, code, tiny_dataset, tiny_model):
        again = trainer.train(tiny_cfg, code=code, dataset=tiny_dataset)
        np.testing.assert_array_equal(again.encoder.theta, tiny_model.encoder.theta)
        np.testing.assert_array_equal(again.decoder.theta, tiny_model.decoder.theta)
        np.testing.assert_array_equal(again.table.freq, tiny_model.table.freq)

    def test_gradient_flows_through_quantizer(self, tiny_cfg, code, tiny_dataset):
        """One epoch moves the encoder despite the piecewise-constant
        quantizer: the straight-through pass is wired in."""
        cfg = dataclasses.replace(tiny_cfg, epochs=1)
        import softbitq.neuralnet as nn
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0]))
        init = nn.build_encoder(cfg.k, rng).theta.copy()
        model = trainer.train(cfg, code=code, dataset=tiny_dataset)
        assert np.abs(model.encoder.theta - init).max() > 1e-4

    def test_entropy_weight_changes_solution(self, tiny_cfg, code, tiny_dataset):
        heavy = dataclasses.replace(tiny_cfg, alpha=0.5)
        a = trainer.train(tiny_cfg, code=code, dataset=tiny_dataset)
        b = trainer.train(heavy, code=code, dataset=tiny_dataset)
        ha = quantcore.hard_entropy(a.table.p)
        hb = quantcore.hard_entropy(b.table.p)
        assert hb < ha

    def test_plain_mode_skips_entropy_term(self, tiny_cfg, code, tiny_dataset):
        model = trainer.train(tiny_cfg, code=code, dataset=tiny_dataset,
                              quantization_aware=False)
        assert not model.quantization_aware
        for row in model.curve:
            assert row["loss"] == pytest.approx(row["distortion"])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self, tiny_cfg, code, tiny_dataset):
        bad = dataclasses.replace(tiny_cfg, learning_rate=1e9, epochs=3)
        with pytest.raises(trainer.TrainingDiverged):
            trainer.train(bad, code=code, dataset=tiny_dataset)


class TestDeployment:
    def test_encode_decode_shapes(self, tiny_model):
        rng = np.random.default_rng(SEED)
        lam = rng.uniform(-1, 1, (40, tiny_model.cfg.k)).astype(np.float32)
        idx = trainer.encode_soft_bits(tiny_model, lam)
        assert idx.shape == (40, 3)
        assert idx.dtype == np.int64
        assert idx.min() >= 0 and idx.max() <= 63
        lam_hat = trainer.decode_indices(tiny_model, idx)
        assert lam_hat.shape == (40, tiny_model.cfg.k)
        np.testing.assert_array_equal(
            lam_hat, trainer.reconstruct_soft_bits(tiny_model, lam))

    def test_reconstruction_beats_prior(self, tiny_model, tiny_dataset):
        """Even the tiny run reconstructs better than predicting zero."""
        lam = tiny_dataset.soft_bits[:2000]
        lam_hat = trainer.reconstruct_soft_bits(tiny_model, lam)
        err_model = trainer.distortion(lam, lam_hat)
        err_zero = trainer.distortion(lam, np.zeros_like(lam))
        assert err_model < err_zero

    def test_table_covers_latents(self, tiny_model, tiny_dataset):
        idx = trainer.encode_soft_bits(tiny_model, tiny_dataset.soft_bits[:4096])
        assert (tiny_model.table.freq >= 1).all()
        assert tiny_model.table.p[np.unique(idx)].min() > 1e-6


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tiny_model, tmp_path):
        path = tmp_path / "model.npz"
        trainer.save_checkpoint(tiny_model, path)
        loaded = trainer.load_checkpoint(path)
        np.testing.assert_array_equal(loaded.encoder.theta, tiny_model.encoder.theta)
        np.testing.assert_array_equal(loaded.decoder.theta, tiny_model.decoder.theta)
        np.testing.assert_array_equal(loaded.codebook.centers,
                                      tiny_model.codebook.centers)
        np.testing.assert_array_equal(loaded.table.freq, tiny_model.table.freq)
        assert loaded.cfg == tiny_model.cfg
        assert loaded.quantization_aware == tiny_model.quantization_aware
        assert len(loaded.curve) == len(tiny_model.curve)

    def test_same_outputs_after_reload(self, tiny_model, tmp_path):
        path = tmp_path / "model.npz"
        trainer.save_checkpoint(tiny_model, path)
        loaded = trainer.load_checkpoint(path)
        rng = np.random.default_rng(SEED)
        lam = rng.uniform(-1, 1, (64, tiny_model.cfg.k)).astype(np.float32)
        np.testing.assert_array_equal(
            trainer.reconstruct_soft_bits(loaded, lam),
            trainer.reconstruct_soft_bits(tiny_model, lam))

    def test_version_check(self, tiny_model, tmp_path):
        path = tmp_path / "model.npz"
        trainer.save_checkpoint(tiny_model, path)
        data = dict(np.load(path, allow_pickle=False))
        data["version"] = np.array(99)
        np.savez(path, **data)
        with pytest.raises(ValueError):
            trainer.load_checkpoint(path)

    def test_curve_csv(self, tiny_model, tmp_path):
        path = tmp_path / "curve.csv"
        trainer.write_curve_csv(tiny_model.curve, path)
        text = path.read_text().splitlines()
        assert text[0].startswith("epoch,")
        assert len(text) == len(tiny_model.curve) + 1
