import dataclasses
import math

import numpy as np
import pytest

from wikitraffic.metrics import mae
from wikitraffic.neuralnet import (
    Checkpoint,
    CheckpointFormatError,
    DenseParams,
    LSTMParams,
    TrainConfig,
    TrainingDivergedError,
    gradient_check,
    init_params,
    load_checkpoint,
    lstm_forward,
    mae_loss_grad,
    model_backward,
    model_forward,
    params_as_dict,
    predict,
    rmsprop_update,
    save_checkpoint,
    train,
    train_both_models,
)
from wikitraffic.neuralnet.training import RMSPropState
from wikitraffic.transform import make_windows

import oracles
from conftest import make_table

TINY = TrainConfig(hidden_size=4, dropout=0.0, seed=0)


class TestInit:
    def test_deterministic_given_seed(self):
        cfg = TrainConfig(seed=42, hidden_size=8)
        a1, d1 = init_params(5, 3, cfg)
        a2, d2 = init_params(5, 3, cfg)
        np.testing.assert_array_equal(a1.w_in, a2.w_in)
        np.testing.assert_array_equal(a1.u_rec, a2.u_rec)
        np.testing.assert_array_equal(d1.w, d2.w)

    def test_forget_bias_is_one(self):
        lstm, _ = init_params(5, 3, TINY)
        np.testing.assert_array_equal(lstm.bias("forget"), np.ones(4))
        np.testing.assert_array_equal(lstm.bias("input"), np.zeros(4))
        np.testing.assert_array_equal(lstm.bias("output"), np.zeros(4))

    def test_glorot_bounds(self):
        cfg = TrainConfig(seed=1, hidden_size=16)
        lstm, dense = init_params(40, 6, cfg)
        assert np.abs(lstm.w_in).max() <= math.sqrt(6.0 / (40 + 16))
        assert np.abs(lstm.u_rec).max() <= math.sqrt(6.0 / 32)
        assert np.abs(dense.w).max() <= math.sqrt(6.0 / (16 + 6))

    def test_parameter_count_formula(self):
        cfg = TrainConfig(hidden_size=256)
        lstm, dense = init_params(430, 60, cfg)
        F, H, out = 430, 256, 60
        assert lstm.parameter_count == 4 * (F * H + H * H + H)
        assert dense.parameter_count == H * out + out
        assert lstm.parameter_count + dense.parameter_count == 718_908

    def test_gate_views_share_storage(self):
        lstm, _ = init_params(5, 3, TINY)
        lstm.w("input")[0, 0] = 123.0
        assert lstm.w_in[0, 0] == 123.0


class TestForward:
    def test_all_zero_weights_give_zero_hidden(self):
        lstm = LSTMParams(np.zeros((3, 16)), np.zeros((4, 16)), np.zeros(16))
        h, _ = lstm_forward(lstm, np.ones((2, 3)))
        np.testing.assert_array_equal(h, np.zeros((2, 4)))

    def test_forget_bias_alone_still_zero(self):
        b = np.zeros(16)
        b[4:8] = 1.0
        lstm = LSTMParams(np.zeros((3, 16)), np.zeros((4, 16)), b)
        h, _ = lstm_forward(lstm, np.zeros((2, 3)))
        np.testing.assert_array_equal(h, np.zeros((2, 4)))

    def test_matches_scalar_oracle(self, rng):
        cfg = TrainConfig(hidden_size=2, seed=9)
        lstm, _ = init_params(3, 1, cfg)
        X = rng.normal(size=(2, 3))
        h, _ = lstm_forward(lstm, X)
        expected = oracles.oracle_lstm_last_hidden(
            lstm.w_in.tolist(), lstm.u_rec.tolist(), lstm.b_gates.tolist(),
            X[:, None, :].tolist(), 2,
        )
        np.testing.assert_allclose(h, expected, rtol=1e-12, atol=1e-12)

    def test_matches_oracle_with_injected_state(self, rng):
        cfg = TrainConfig(hidden_size=3, seed=5)
        lstm, _ = init_params(4, 1, cfg)
        X = rng.normal(size=(2, 4))
        h0 = rng.normal(size=(2, 3))
        c0 = rng.normal(size=(2, 3))
        h, _ = lstm_forward(lstm, X, h0=h0, c0=c0)
        for i in range(2):
            expected = oracles.oracle_lstm_last_hidden(
                lstm.w_in.tolist(), lstm.u_rec.tolist(), lstm.b_gates.tolist(),
                [X[i][None, :].tolist()], 3, h0=h0[i].tolist(), c0=c0[i].tolist(),
            )
            np.testing.assert_allclose(h[i], expected[0], rtol=1e-12, atol=1e-12)

    def test_matches_oracle_multistep(self, rng):
        cfg = TrainConfig(hidden_size=3, seed=7)
        lstm, _ = init_params(2, 1, cfg)
        X = rng.normal(size=(4, 3, 2))  # three timesteps
        h, _ = lstm_forward(lstm, X)
        expected = oracles.oracle_lstm_last_hidden(
            lstm.w_in.tolist(), lstm.u_rec.tolist(), lstm.b_gates.tolist(),
            X.tolist(), 3,
        )
        np.testing.assert_allclose(h, expected, rtol=1e-12, atol=1e-12)

    def test_feature_mismatch(self):
        lstm, _ = init_params(3, 1, TINY)
        with pytest.raises(ValueError):
            lstm_forward(lstm, np.zeros((2, 5)))


class TestDropout:
    def test_eval_mode_is_identity(self, rng):
        lstm, dense = init_params(3, 2, TINY)
        X = rng.uniform(size=(4, 3))
        p1, _ = model_forward(lstm, dense, X, dropout=0.5, train_mode=False)
        p2, _ = model_forward(lstm, dense, X, dropout=0.0, train_mode=False)
        np.testing.assert_array_equal(p1, p2)

    def test_rate_zero_same_in_both_modes(self, rng):
        lstm, dense = init_params(3, 2, TINY)
        X = rng.uniform(size=(4, 3))
        p1, _ = model_forward(lstm, dense, X, dropout=0.0, train_mode=True, rng=rng)
        p2, _ = model_forward(lstm, dense, X, dropout=0.0, train_mode=False)
        np.testing.assert_array_equal(p1, p2)

    def test_inverted_dropout_expectation(self, rng):
        cfg = TrainConfig(hidden_size=32, dropout=0.3, seed=2)
        lstm, dense = init_params(6, 2, cfg)
        X = rng.uniform(0.5, 1.5, size=(1, 6))
        h, _ = lstm_forward(lstm, X)
        total = np.zeros_like(h)
        n_draws = 10_000
        for _ in range(n_draws):
            _, cache = model_forward(
                lstm, dense, X, dropout=0.3, train_mode=True, rng=rng
            )
            total += cache.h_dropped
        mean = total / n_draws
        scale = float(np.abs(h).mean())
        np.testing.assert_allclose(mean, h, rtol=0.02, atol=0.02 * scale)


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self, rng):
        lstm, dense = init_params(3, 2, TINY)
        X = rng.uniform(size=(4, 3))
        _, cache = model_forward(lstm, dense, X)
        grads = model_backward(lstm, dense, cache, np.zeros((4, 2)))
        for g in grads.values():
            assert np.all(g == 0.0)

    def test_masked_unit_gets_no_dense_gradient(self, rng):
        cfg = TrainConfig(hidden_size=4, dropout=0.5, seed=0)
        lstm, dense = init_params(3, 2, cfg)
        X = rng.uniform(size=(5, 3))
        mask = np.array([True, False, True, True])[None, :].repeat(5, axis=0)
        pred, cache = model_forward(
            lstm, dense, X, dropout=0.5, train_mode=True, dropout_mask=mask
        )
        _, d_pred = mae_loss_grad(pred, pred + 1.0)
        grads = model_backward(lstm, dense, cache, d_pred)
        assert np.all(grads["w_out"][1, :] == 0.0)
        assert np.any(grads["w_out"][0, :] != 0.0)

    def test_gradient_check_with_dropout_and_state(self):
        err = gradient_check(TrainConfig(hidden_size=4, dropout=0.3, seed=0))
        assert err < 1e-4

    def test_gradient_check_without_dropout(self):
        err = gradient_check(TrainConfig(hidden_size=4, dropout=0.0, seed=1))
        assert err < 1e-4

    def test_gradient_check_catches_corruption(self):
        def corrupt(grads):
            grads["w_in"][0, 0] *= 2.0

        err = gradient_check(
            TrainConfig(hidden_size=4, dropout=0.3, seed=0), mutate_grads=corrupt
        )
        assert err > 1e-2

    def test_gradient_check_multistep(self, rng):
        cfg = TrainConfig(hidden_size=3, dropout=0.0, seed=4)
        lstm, dense = init_params(2, 2, cfg)
        X = rng.uniform(0, 1, (4, 3, 2))
        pred, _ = model_forward(lstm, dense, X)
        offs = rng.uniform(0.5, 1.5, pred.shape) * rng.choice([-1.0, 1.0], pred.shape)
        err = gradient_check(cfg, sample=(X, pred + offs, None, None, None))
        assert err < 1e-4


class TestRMSProp:
    def test_hand_computed_first_step(self):
        cfg = TrainConfig(learning_rate=1e-3, rho=0.9, epsilon=1e-7)
        p = {"w": np.array([1.0])}
        g = {"w": np.array([1.0])}
        state = RMSPropState({"w": np.zeros(1)})
        rmsprop_update(p, g, state, cfg)
        expected_delta = -1e-3 / (math.sqrt(0.1) + 1e-7)
        assert p["w"][0] == pytest.approx(1.0 + expected_delta, rel=1e-12)
        assert p["w"][0] == pytest.approx(1.0 - 3.1623e-3, abs=1e-7)

    def test_zero_gradient_decays_accumulator_only(self):
        cfg = TrainConfig()
        p = {"w": np.array([2.0])}
        state = RMSPropState({"w": np.array([0.5])})
        rmsprop_update(p, {"w": np.array([0.0])}, state, cfg)
        assert p["w"][0] == 2.0
        assert state.accum["w"][0] == pytest.approx(0.45)

    def test_equal_gradients_move_equally(self):
        cfg = TrainConfig()
        p = {"a": np.array([1.0]), "b": np.array([5.0])}
        g = {"a": np.array([0.3]), "b": np.array([0.3])}
        state = RMSPropState({"a": np.zeros(1), "b": np.zeros(1)})
        rmsprop_update(p, g, state, cfg)
        assert (p["a"][0] - 1.0) == pytest.approx(p["b"][0] - 5.0, rel=1e-12)


def _toy_problem(rng, n=60, f=10, horizon=3):
    X = rng.uniform(0, 1, (n, f))
    W = rng.normal(0, 1, (f, horizon))
    y = X @ W
    return X[: n - 12], y[: n - 12], X[n - 12 :], y[n - 12 :]


class TestTrain:
    def test_history_shapes_and_best(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        cfg = TrainConfig(epochs=4, hidden_size=8, batch_size=8, dropout=0.1, seed=0)
        ckpt, hist = train(X_tr, y_tr, X_val, y_val, cfg)
        assert len(hist["train_mae"]) == 4
        assert len(hist["val_mae"]) == 4
        assert ckpt.val_loss == min(hist["val_mae"])
        assert all(ckpt.val_loss <= v for v in hist["val_mae"])
        assert hist["best_epoch"] == int(np.argmin(hist["val_mae"]))

    def test_single_epoch_checkpoint_is_post_epoch_state(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        cfg = TrainConfig(epochs=1, hidden_size=8, batch_size=0, dropout=0.0, seed=1)
        ckpt, hist = train(X_tr, y_tr, X_val, y_val, cfg)
        assert ckpt.epoch == 0
        assert ckpt.val_loss == hist["val_mae"][0]
        # re-evaluating the stored parameters reproduces the stored loss
        pred = predict(ckpt, X_val)
        assert mae(y_val, pred).value == pytest.approx(ckpt.val_loss, abs=1e-12)

    def test_training_reduces_loss(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng, n=120, f=12)
        cfg = TrainConfig(
            epochs=20, hidden_size=16, batch_size=16, dropout=0.0, seed=3,
            learning_rate=3e-3,
        )
        lstm0, dense0 = init_params(X_tr.shape[1], y_tr.shape[1], cfg)
        pred0, _ = model_forward(lstm0, dense0, X_tr)
        untrained = mae(y_tr, pred0).value
        ckpt, hist = train(X_tr, y_tr, X_val, y_val, cfg)
        assert hist["train_mae"][-1] < 0.5 * untrained

    def test_determinism_bitwise(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        cfg = TrainConfig(epochs=3, hidden_size=8, batch_size=8, dropout=0.3, seed=11)
        ck1, h1 = train(X_tr, y_tr, X_val, y_val, cfg)
        ck2, h2 = train(X_tr, y_tr, X_val, y_val, cfg)
        assert h1 == h2
        np.testing.assert_array_equal(ck1.lstm.w_in, ck2.lstm.w_in)
        np.testing.assert_array_equal(ck1.dense.w, ck2.dense.w)

    def test_nan_inputs_abort_with_location(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        y_bad = y_tr.copy()
        y_bad[0, 0] = np.nan
        cfg = TrainConfig(epochs=1, hidden_size=4, batch_size=0, seed=0)
        with pytest.raises(TrainingDivergedError, match="epoch 0"):
            train(X_tr, y_bad, X_val, y_val, cfg)

    def test_row_count_mismatch(self, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        with pytest.raises(ValueError):
            train(X_tr[:-1], y_tr, X_val, y_val, TrainConfig(epochs=1, hidden_size=4))

    def test_loss_matches_metrics_mae(self, rng):
        pred = rng.normal(size=(7, 5))
        y = rng.normal(size=(7, 5))
        loss, _ = mae_loss_grad(pred, y)
        assert loss == mae(y, pred).value


class TestRefinementPair:
    def test_second_model_uses_tail_holdout(self, rng):
        values = rng.integers(0, 40, (40, 130)).astype(float)
        table = make_table(values)
        split = make_windows(table, 60)
        cfg = TrainConfig(epochs=1, hidden_size=4, batch_size=0, dropout=0.0, seed=5)
        ck_a, hist_a, ck_b, hist_b = train_both_models(split, cfg)
        assert ck_a.config.seed == 5
        assert ck_b.config.seed == 6
        n = split.X_validate.shape[0]
        n_holdout = max(1, int(n * 0.05))
        X_holdout = split.X_validate[n - n_holdout :]
        y_holdout = split.y_validate[n - n_holdout :]
        pred = predict(ck_b, X_holdout)
        assert mae(y_holdout, pred).value == pytest.approx(ck_b.val_loss, abs=1e-12)


class TestPredict:
    def test_deterministic_and_shape(self, rng):
        cfg = TrainConfig(hidden_size=8, seed=0)
        lstm, dense = init_params(6, 60, cfg)
        ckpt = Checkpoint(lstm, dense, cfg, 0, 1.0)
        X = rng.uniform(size=(9, 6))
        p1 = predict(ckpt, X)
        p2 = predict(ckpt, X)
        assert p1.shape == (9, 60)
        np.testing.assert_array_equal(p1, p2)

    def test_feature_mismatch(self):
        cfg = TrainConfig(hidden_size=4, seed=0)
        lstm, dense = init_params(6, 3, cfg)
        ckpt = Checkpoint(lstm, dense, cfg, 0, 1.0)
        with pytest.raises(ValueError):
            predict(ckpt, np.zeros((2, 7)))


class TestCheckpointIO:
    def _ckpt(self, rng, with_opt=True):
        cfg = TrainConfig(hidden_size=5, seed=8)
        lstm, dense = init_params(7, 4, cfg)
        opt = (
            {k: rng.uniform(size=v.shape) for k, v in params_as_dict(lstm, dense).items()}
            if with_opt
            else None
        )
        return Checkpoint(lstm, dense, cfg, 3, 0.123456789, "sidecar.json", opt)

    def test_round_trip(self, tmp_path, rng):
        ckpt = self._ckpt(rng)
        path = tmp_path / "model.bin"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        np.testing.assert_array_equal(back.lstm.w_in, ckpt.lstm.w_in)
        np.testing.assert_array_equal(back.lstm.u_rec, ckpt.lstm.u_rec)
        np.testing.assert_array_equal(back.dense.w, ckpt.dense.w)
        np.testing.assert_array_equal(back.opt_state["w_in"], ckpt.opt_state["w_in"])
        assert back.val_loss == ckpt.val_loss
        assert back.epoch == 3
        assert back.scaler_ref == "sidecar.json"
        assert back.config == ckpt.config

    def test_restored_predicts_identically(self, tmp_path, rng):
        ckpt = self._ckpt(rng, with_opt=False)
        X = rng.uniform(size=(6, 7))
        path = tmp_path / "model.bin"
        save_checkpoint(ckpt, path)
        np.testing.assert_array_equal(predict(load_checkpoint(path), X), predict(ckpt, X))

    def test_validation_loss_reproduced_within_tolerance(self, tmp_path, rng):
        X_tr, y_tr, X_val, y_val = _toy_problem(rng)
        cfg = TrainConfig(epochs=2, hidden_size=8, batch_size=8, seed=2)
        ckpt, _ = train(X_tr, y_tr, X_val, y_val, cfg)
        path = tmp_path / "model.bin"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        re_val = mae(y_val, predict(back, X_val)).value
        assert abs(re_val - back.val_loss) < 1e-9

    def test_bytes_deterministic(self, tmp_path, rng):
        ckpt = self._ckpt(rng)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_checkpoint(ckpt, p1)
        save_checkpoint(ckpt, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_wrong_version_rejected(self, tmp_path, rng):
        path = tmp_path / "model.bin"
        save_checkpoint(self._ckpt(rng), path)
        blob = bytearray(path.read_bytes())
        blob[7] = 99  # version byte right after the magic
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointFormatError, match="version"):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path, rng):
        path = tmp_path / "model.bin"
        save_checkpoint(self._ckpt(rng), path)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(CheckpointFormatError, match="truncated"):
            load_checkpoint(path)
