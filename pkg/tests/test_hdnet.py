import numpy as np
import pytest

from hdflow.ad import Tape
from hdflow.fields import FieldError, VectorField, curl, divergence
from hdflow.hdnet import (HDNetConfig, HDNetModel, TrainingError,
                          format_eval_table, hdnet_eval, hdnet_forward,
                          hdnet_loss, hdnet_train, init_hdnet, load_hdnet,
                          parameter_shapes, save_hdnet)
from hdflow.synthesis import generate_dataset, load_manifest, synthesize_sample


def small_config(**kw):
    defaults = dict(resolution=16, depth=2, base_channels=8, epochs=2,
                    batch_size=4, seed=3)
    defaults.update(kw)
    return HDNetConfig(**defaults)


def random_model(config, seed=0):
    rng = np.random.default_rng(seed)
    params = {name: rng.normal(0, 0.3, size=shape)
              for name, shape in parameter_shapes(config).items()}
    return HDNetModel(config, params)


@pytest.fixture(scope="module")
def dataset16(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds16")
    generate_dataset(12, 16, 16, base_seed=42, out_dir=out, octave_set=(1, 2))
    return out, load_manifest(out)


class TestConfig:
    def test_resolution_must_match_depth(self):
        with pytest.raises(ValueError, match="divisible"):
            HDNetConfig(resolution=20, depth=3)

    def test_parameter_shape_validation(self):
        config = small_config()
        params = {name: np.zeros(shape)
                  for name, shape in parameter_shapes(config).items()}
        params["mid.bias"] = np.zeros(99)
        with pytest.raises(ValueError, match="mid.bias"):
            HDNetModel(config, params)

    def test_missing_parameter_rejected(self):
        config = small_config()
        params = {name: np.zeros(shape)
                  for name, shape in parameter_shapes(config).items()}
        del params["out.weight"]
        with pytest.raises(ValueError, match="names"):
            HDNetModel(config, params)


class TestForward:
    def test_untrained_model_is_identity_decomposition(self):
        config = small_config()
        model = init_hdnet(config)
        pair = synthesize_sample(5, 16, 16, 2, 2)
        phi_hat, v_irr_hat, v_sol_hat = hdnet_forward(model, pair.v_star)
        assert np.array_equal(phi_hat.data, np.zeros((16, 16)))
        assert np.array_equal(v_sol_hat.u, pair.v_star.u)
        assert np.array_equal(v_sol_hat.w, pair.v_star.w)
        assert np.array_equal(v_irr_hat.u, np.zeros((16, 16)))

    def test_curl_free_for_arbitrary_parameters(self):
        config = small_config()
        for seed in range(5):
            model = random_model(config, seed)
            pair = synthesize_sample(seed, 16, 16, 2, 2)
            _, v_irr_hat, v_sol_hat = hdnet_forward(model, pair.v_star)
            scale = max(np.max(np.abs(v_irr_hat.u)), np.max(np.abs(v_irr_hat.w)), 1e-30)
            assert np.max(np.abs(curl(v_irr_hat).data)) < 1e-12 * scale / pair.v_star.spacing
            # a + (b - a) reproduces b to round-off, not bit-exactly
            recon = v_irr_hat + v_sol_hat
            vmax = max(np.max(np.abs(pair.v_star.u)), np.max(np.abs(pair.v_star.w)))
            assert np.allclose(recon.u, pair.v_star.u, atol=1e-14 * max(vmax, scale))
            assert np.allclose(recon.w, pair.v_star.w, atol=1e-14 * max(vmax, scale))

    def test_scale_equivariance(self):
        config = small_config()
        model = random_model(config, 1)
        pair = synthesize_sample(9, 16, 16, 2, 2)
        phi1, _, _ = hdnet_forward(model, pair.v_star)
        phi2, _, _ = hdnet_forward(model, 3.0 * pair.v_star)
        assert np.allclose(phi2.data, 3.0 * phi1.data, rtol=1e-10, atol=1e-14)

    def test_resolution_mismatch_rejected(self):
        model = init_hdnet(small_config())
        with pytest.raises(FieldError, match="resolution"):
            hdnet_forward(model, VectorField.zeros(32, 32))


class TestLoss:
    def test_perfect_prediction_is_zero(self):
        pair = synthesize_sample(2, 16, 16, 2, 2)
        tape = Tape()
        phi0 = pair.phi_gt.data - np.mean(pair.phi_gt.data)
        pred = (tape.var(phi0), tape.var(pair.chi * pair.v_sol_gt.u),
                tape.var(pair.chi * pair.v_sol_gt.w))
        assert float(hdnet_loss(pred, pair).values) == 0.0

    def test_constant_potential_offset(self):
        pair = synthesize_sample(2, 16, 16, 2, 2)
        tape = Tape()
        c = 0.37
        phi0 = pair.phi_gt.data - np.mean(pair.phi_gt.data)
        pred = (tape.var(phi0 + c), tape.var(pair.chi * pair.v_sol_gt.u),
                tape.var(pair.chi * pair.v_sol_gt.w))
        loss = float(hdnet_loss(pred, pair, lambda1=2.0).values)
        assert np.isclose(loss, 2.0 * c ** 2, rtol=1e-12)

    def test_matches_scripted_evaluation(self):
        pair = synthesize_sample(0, 16, 16, 2, 2)
        rng = np.random.default_rng(11)
        phi = rng.normal(size=(16, 16))
        su = rng.normal(size=(16, 16))
        sw = rng.normal(size=(16, 16))
        tape = Tape()
        lam = 0.7
        loss = float(hdnet_loss((tape.var(phi), tape.var(su), tape.var(sw)),
                                pair, lam).values)
        phi0 = pair.phi_gt.data - pair.phi_gt.data.mean()
        expected = (np.mean((su - pair.chi * pair.v_sol_gt.u) ** 2)
                    + np.mean((sw - pair.chi * pair.v_sol_gt.w) ** 2)
                    + lam * np.mean((phi - phi0) ** 2))
        assert np.isclose(loss, expected, rtol=1e-12)


class TestCheckpoint:
    def test_save_load_round_trip(self, tmp_path):
        config = small_config()
        model = random_model(config, 4)
        path = tmp_path / "model.hckp"
        save_hdnet(path, model)
        loaded = load_hdnet(path)
        # config floats round-trip through float32 storage
        assert loaded.config.resolution == config.resolution
        assert loaded.config.depth == config.depth
        assert loaded.config.seed == config.seed
        assert np.isclose(loaded.config.lr, config.lr, rtol=1e-6)
        for name in model.params:
            assert np.allclose(loaded.params[name], model.params[name],
                               atol=1e-6)


class TestTraining:
    def test_smoke_epoch(self, dataset16, tmp_path):
        dataset_dir, manifest = dataset16
        config = small_config(epochs=1)
        model, log = hdnet_train(config, manifest, dataset_dir,
                                 out_dir=tmp_path, eval_fraction=0.25,
                                 eval_every=1, checkpoint_every=1)
        assert len(log) == 1
        assert np.isfinite(log[0]["train_loss"])
        assert log[0]["eval_div_mse"] is not None
        assert (tmp_path / "model.hckp").exists()
        assert (tmp_path / "checkpoint_00001.hckp").exists()
        assert (tmp_path / "training_log.jsonl").exists()

    def test_deterministic(self, dataset16):
        dataset_dir, manifest = dataset16
        config = small_config(epochs=2)
        m1, log1 = hdnet_train(config, manifest, dataset_dir)
        m2, log2 = hdnet_train(config, manifest, dataset_dir)
        assert log1 == log2
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])

    def test_loss_decreases(self, dataset16):
        dataset_dir, manifest = dataset16
        config = small_config(epochs=30, lr=1e-3)
        _, log = hdnet_train(config, manifest, dataset_dir, eval_fraction=0.0)
        assert log[-1]["train_loss"] < 0.5 * log[0]["train_loss"]

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(TrainingError, match="no samples"):
            hdnet_train(small_config(), {"samples": []}, tmp_path)

    def test_resolution_mismatch_rejected(self, dataset16):
        dataset_dir, manifest = dataset16
        config = HDNetConfig(resolution=32, depth=2, base_channels=8,
                             epochs=1, batch_size=4)
        with pytest.raises(TrainingError, match="resolution"):
            hdnet_train(config, manifest, dataset_dir)


class TestEval:
    def test_groups_and_table(self, dataset16):
        dataset_dir, manifest = dataset16
        model = init_hdnet(small_config())
        rows = hdnet_eval(model, dataset_dir, manifest["samples"])
        assert {r["n"] for r in rows} <= {1, 2}
        assert sum(r["count"] for r in rows) == len(manifest["samples"])
        table = format_eval_table(rows)
        assert "div MSE mean" in table
        assert len(table.splitlines()) == len(rows) + 1

    def test_empty_group_reported(self, dataset16):
        dataset_dir, manifest = dataset16
        model = init_hdnet(small_config())
        rows = hdnet_eval(model, dataset_dir, manifest["samples"],
                          groups=[(7, None)])
        assert rows[0]["count"] == 0
        assert np.isnan(rows[0]["mean"])

    def test_untrained_eval_equals_raw_divergence(self, dataset16):
        dataset_dir, manifest = dataset16
        model = init_hdnet(small_config())
        entry = manifest["samples"][0]
        rows = hdnet_eval(model, dataset_dir, [entry])
        from hdflow.synthesis import load_sample
        pair = load_sample(dataset_dir, entry)
        raw = float(np.mean(divergence(pair.v_star).data ** 2))
        row = [r for r in rows if r["count"]][0]
        assert np.isclose(row["mean"], raw, rtol=1e-10)
