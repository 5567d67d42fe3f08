import numpy as np
import pytest

from intershap.data import ModalBatch, MultimodalSample, ProvenanceError
from intershap.metrics import f1_macro
from intershap.models import (
    FcnnModel,
    FcnnSpec,
    TrainConfig,
    XorOracle,
    load_model,
    predict_split,
    save_model,
    train_fcnn,
)
from intershap.models.fcnn import (
    concat_inputs,
    fcnn_forward,
    gradient_check,
    init_params,
    loss_and_grads,
    zero_params,
)
from intershap.models.oracle import UnsupportedSettingError, xor_oracle_predict
from intershap.synthgen import SynthConfig, generate


def small_inputs(spec, n=16, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, spec.input_dim)), rng.integers(0, spec.class_count, n)


class TestArchitecture:
    def test_layer_sizes(self):
        assert FcnnSpec("early", (110, 90)).layer_sizes == [200, 100, 50, 2]
        assert FcnnSpec("intermediate", (110, 90)).layer_sizes == [200, 100, 50, 2]
        assert FcnnSpec("late", (110, 90)).layer_sizes == [200, 100, 49, 2]

    def test_block_structure(self):
        spec = FcnnSpec("late", (6, 4))
        m0, m1, m2 = spec.weight_masks()
        assert m0[:6, 3:].sum() == 0 and m0[6:, :3].sum() == 0
        assert m1 is not None and m2 is None
        assert FcnnSpec("early", (6, 4)).weight_masks() == [None, None, None]

    @pytest.mark.parametrize("fusion", ["intermediate", "late"])
    def test_masked_weights_stay_zero_after_training(self, fusion):
        ds = generate(SynthConfig(N=400, seed=1))
        model, _ = train_fcnn(FcnnSpec(fusion, ds.dims), ds, TrainConfig(epochs=2))
        for p, mask in zip(model.params[::2], model.spec.weight_masks()):
            if mask is not None:
                assert np.all(p[mask == 0] == 0)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            FcnnSpec("sideways", (4, 4))
        with pytest.raises(ValueError):
            FcnnSpec("early", (1, 1))


class TestForward:
    def test_zero_params_uniform(self):
        spec = FcnnSpec("early", (6, 4), class_count=3)
        sample = MultimodalSample([np.ones(6), np.ones(4)], 0)
        np.testing.assert_allclose(fcnn_forward(spec, zero_params(spec), sample), [1 / 3] * 3)

    @pytest.mark.parametrize("fusion", ["early", "intermediate", "late"])
    def test_probabilities_sum_to_one(self, fusion):
        spec = FcnnSpec(fusion, (8, 6))
        params = init_params(spec, np.random.default_rng(0))
        x, _ = small_inputs(spec, 50)
        probs = FcnnModel(spec, params).predict_proba(ModalBatch([x[:, :8], x[:, 8:]]))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0)

    def test_modality_permutation_equivariance(self):
        spec = FcnnSpec("early", (5, 5))
        params = init_params(spec, np.random.default_rng(2))
        perm = np.r_[5:10, 0:5]
        swapped = [params[0][perm]] + params[1:]
        x = np.random.default_rng(3).standard_normal((7, 10))
        a = FcnnModel(spec, params).predict_proba(ModalBatch([x[:, :5], x[:, 5:]]))
        b = FcnnModel(spec, swapped).predict_proba(ModalBatch([x[:, 5:], x[:, :5]]))
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_batch_size_independence(self):
        ds = generate(SynthConfig(N=700, seed=3))
        spec = FcnnSpec("early", ds.dims)
        model = FcnnModel(spec, init_params(spec, np.random.default_rng(0)))
        _, full = predict_split(model, ds, "all")
        _, single = predict_split(model, ds, "all", batch_size=1)
        assert np.array_equal(full, single)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            concat_inputs(FcnnSpec("early", (4, 4)), [np.zeros((1, 4)), np.zeros((1, 3))])


class TestGradients:
    @pytest.mark.parametrize("fusion", ["early", "intermediate", "late"])
    def test_finite_differences(self, fusion):
        spec = FcnnSpec(fusion, (8, 6), class_count=3)
        params = init_params(spec, np.random.default_rng(4))
        x, y = small_inputs(spec)
        assert gradient_check(spec, params, x, y) < 1e-3

    def test_bias_gradients_on_zero_input(self):
        spec = FcnnSpec("early", (6, 4))
        params = init_params(spec, np.random.default_rng(5))
        params[1] = np.abs(params[1]) + 0.1  # keep first-layer units active
        x, y = np.zeros((4, 10)), np.array([0, 1, 0, 1])
        _, grads = loss_and_grads(spec, params, x, y)
        for k in (1, 3, 5):
            for idx in range(params[k].size):
                old = params[k][idx]
                params[k][idx] = old + 1e-5
                up, _ = loss_and_grads(spec, params, x, y)
                params[k][idx] = old - 1e-5
                down, _ = loss_and_grads(spec, params, x, y)
                params[k][idx] = old
                assert abs((up - down) / 2e-5 - grads[k][idx]) < 1e-4

    def test_linear_closed_form(self):
        spec = FcnnSpec("early", (4, 4), activation="linear")
        params = init_params(spec, np.random.default_rng(6))
        x, y = small_inputs(spec, 10)
        _, grads = loss_and_grads(spec, params, x, y)
        # collapse the network to a single affine map and differentiate that
        W0, b0, W1, b1, W2, b2 = params
        W = W0 @ W1 @ W2
        logits = x @ W + (b0 @ W1 + b1) @ W2 + b2
        p = np.exp(logits - logits.max(1, keepdims=True))
        p /= p.sum(1, keepdims=True)
        p[np.arange(10), y] -= 1
        p /= 10
        np.testing.assert_allclose(grads[5], p.sum(0), atol=1e-9)
        np.testing.assert_allclose(grads[4], (x @ W0 @ W1 + b0 @ W1 + b1).T @ p, atol=1e-9)
        np.testing.assert_allclose(grads[0], x.T @ p @ (W1 @ W2).T, atol=1e-9)


class TestTraining:
    def test_deterministic_and_loss_decreases(self):
        ds = generate(SynthConfig(setting="uniqueness", N=1000, seed=2))
        spec = FcnnSpec("early", ds.dims)
        m1, log1 = train_fcnn(spec, ds, TrainConfig(epochs=5, seed=42))
        m2, _ = train_fcnn(spec, ds, TrainConfig(epochs=5, seed=42))
        assert all(np.array_equal(a, b) for a, b in zip(m1.params, m2.params))
        assert log1.final_train_loss < log1.initial_train_loss
        assert len(log1.val_f1) == 5
        for key in ("learning_rate", "weight_decay", "batch_size", "epochs"):
            assert key in m1.manifest["train_config"]
        assert m1.manifest["activation"] == "relu"

    def test_save_load(self, tmp_path):
        spec = FcnnSpec("late", (8, 6))
        model = FcnnModel(spec, [p.astype(np.float32).astype(np.float64)
                                 for p in init_params(spec, np.random.default_rng(0))], {"seed": 3})
        save_model(model, tmp_path)
        loaded = load_model(tmp_path)
        assert loaded.spec == spec
        assert all(np.array_equal(a, b) for a, b in zip(model.params, loaded.params))
        assert loaded.manifest["seed"] == 3


class TestOracle:
    def test_matches_labels(self, small_synergy, small_uniqueness):
        for ds, setting in ((small_synergy, "synergy"), (small_uniqueness, "uniqueness")):
            oracle = XorOracle(setting)
            pred = oracle.predict_proba(ds.batch(ds.indices("test"))).argmax(1)
            assert f1_macro(pred, ds.labels[ds.indices("test")], 2) == 100.0

    def test_one_hot_on_parity(self):
        def sample(bits):
            return MultimodalSample([np.zeros(2), np.zeros(2)], 0, np.array(bits, np.uint8), ((0,), (1,)))

        np.testing.assert_array_equal(xor_oracle_predict(sample([1, 0]), "synergy"), [0.0, 1.0])
        np.testing.assert_array_equal(xor_oracle_predict(sample([1, 1]), "synergy"), [1.0, 0.0])

    def test_uniqueness_ignores_other_modality(self):
        owners = ((1,), (1,))
        mk = lambda bits: MultimodalSample([np.zeros(2), np.zeros(2)], 0, np.array(bits, np.uint8), owners)
        a = xor_oracle_predict(mk([1, 0]), "uniqueness", unique_modality=1)
        np.testing.assert_array_equal(a, [0.0, 1.0])

    @pytest.mark.parametrize("setting", ["redundancy", "random"])
    def test_unsupported(self, setting):
        with pytest.raises(UnsupportedSettingError):
            XorOracle(setting)

    def test_missing_bits(self):
        with pytest.raises(ProvenanceError):
            xor_oracle_predict(MultimodalSample([np.zeros(2), np.zeros(2)], 0), "synergy")


class TestMetrics:
    def test_examples(self):
        from oracles import f1_by_counting

        assert f1_macro([0, 1, 1, 0], [0, 1, 1, 0], 2) == 100.0
        assert f1_macro([0, 0, 0, 0], [0, 0, 1, 1], 2) == pytest.approx(100 / 3)
        assert f1_macro([0, 1, 0, 1], [0, 1, 1, 0], 2) == pytest.approx(50.0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            p, t = rng.integers(0, 3, 40), rng.integers(0, 3, 40)
            assert f1_macro(p, t, 3) == pytest.approx(f1_by_counting(p, t, 3), abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1_macro([0, 1], [0], 2)
