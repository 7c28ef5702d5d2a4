"""Epoch loop with RMSprop updates, best-checkpoint tracking and the
finite-difference gradient check.

One seeded generator drives initialization, per-epoch shuffles and
dropout masks, so a fixed seed reproduces training bit for bit on a
fixed platform and backend.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from . import backends
from .checkpoint import Checkpoint
from .model import mae_loss_grad, model_backward, model_forward
from .params import DenseParams, LSTMParams, TrainConfig, init_params, params_as_dict

__all__ = [
    "RMSPropState",
    "rmsprop_update",
    "train",
    "train_both_models",
    "predict",
    "gradient_check",
    "TrainingDivergedError",
]

log = logging.getLogger("wikitraffic.train")

REFINEMENT_HOLDOUT = 0.05  # tail fraction of rows the second model validates on


class TrainingDivergedError(RuntimeError):
    """Loss or parameters became non-finite during training."""


@dataclass
class RMSPropState:
    """Squared-gradient accumulators, one per parameter array."""

    accum: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, lstm: LSTMParams, dense: DenseParams) -> "RMSPropState":
        return cls({k: np.zeros_like(v) for k, v in params_as_dict(lstm, dense).items()})


def rmsprop_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: RMSPropState,
    config: TrainConfig,
) -> None:
    """Apply one RMSprop step in place on every parameter array."""
    for name, p in params.items():
        backends.rmsprop_step(
            p.reshape(-1),
            np.ascontiguousarray(grads[name]).reshape(-1),
            state.accum[name].reshape(-1),
            config.learning_rate,
            config.rho,
            config.epsilon,
        )


def _validation_mae(lstm, dense, X_val, y_val) -> float:
    pred, _ = model_forward(lstm, dense, X_val, train_mode=False)
    loss, _ = mae_loss_grad(pred, y_val)
    return loss


def train(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
    scaler_ref: str | None = None,
) -> tuple[Checkpoint, dict]:
    """Fit the regressor, keeping the best-on-validation parameters.

    Inputs are expected scaled, targets in log1p space.  Returns the best
    checkpoint and a history dict with per-epoch train/validation MAE.
    """
    X_train = np.ascontiguousarray(X_train, dtype=np.float64)
    y_train = np.ascontiguousarray(y_train, dtype=np.float64)
    n = X_train.shape[0]
    if y_train.shape[0] != n:
        raise ValueError(f"{n} input rows vs {y_train.shape[0]} target rows")
    if X_val.shape[0] != y_val.shape[0]:
        raise ValueError("validation rows misaligned")
    horizon = y_train.shape[1]

    rng = np.random.default_rng(config.seed)
    lstm, dense = init_params(X_train.shape[1], horizon, config, rng=rng)
    params = params_as_dict(lstm, dense)
    state = RMSPropState.for_params(lstm, dense)
    batch = config.batch_size if config.batch_size > 0 else n

    history = {"train_mae": [], "val_mae": [], "best_epoch": -1}
    best: tuple[float, LSTMParams, DenseParams] | None = None

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch):
            rows = order[start : start + batch]
            pred, cache = model_forward(
                lstm, dense, X_train[rows],
                dropout=config.dropout, train_mode=True, rng=rng,
            )
            loss, d_pred = mae_loss_grad(pred, y_train[rows])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}, batch {start // batch}"
                )
            grads = model_backward(lstm, dense, cache, d_pred)
            rmsprop_update(params, grads, state, config)
            batch_losses.append(loss)

        for name, arr in params.items():
            if not np.isfinite(arr).all():
                raise TrainingDivergedError(
                    f"non-finite values in {name} after epoch {epoch}"
                )

        train_mae = float(np.mean(batch_losses))
        val_mae = _validation_mae(lstm, dense, X_val, y_val)
        history["train_mae"].append(train_mae)
        history["val_mae"].append(val_mae)
        improved = best is None or val_mae < best[0]
        if improved:
            best = (val_mae, lstm.copy(), dense.copy())
            history["best_epoch"] = epoch
        log.info(
            "epoch %d/%d train_mae=%.6f val_mae=%.6f%s",
            epoch + 1, config.epochs, train_mae, val_mae,
            " (best)" if improved else "",
        )

    val_loss, best_lstm, best_dense = best
    ckpt = Checkpoint(
        best_lstm, best_dense, config, history["best_epoch"], val_loss, scaler_ref,
        opt_state={k: v.copy() for k, v in state.accum.items()},
    )
    return ckpt, history


def train_both_models(
    split, config: TrainConfig, scaler_ref: str | None = None
) -> tuple[Checkpoint, dict, Checkpoint, dict]:
    """Train the main model and the refinement model.

    The first fits on the training window and validates on the validation
    window.  The second fits on the validation window itself, holding out
    the last 5% of its rows (stored order) for checkpoint selection, and
    uses a seed offset of 1 so the pair differs by more than data alone.
    """
    ckpt_a, hist_a = train(
        split.X_train, split.y_train, split.X_validate, split.y_validate,
        config, scaler_ref,
    )
    n = split.X_validate.shape[0]
    n_holdout = max(1, int(n * REFINEMENT_HOLDOUT))
    if n - n_holdout < 1:
        raise ValueError(f"{n} rows is too few to carve a refinement holdout")
    cut = n - n_holdout
    cfg_b = dataclasses.replace(config, seed=config.seed + 1)
    ckpt_b, hist_b = train(
        split.X_validate[:cut], split.y_validate[:cut],
        split.X_validate[cut:], split.y_validate[cut:],
        cfg_b, scaler_ref,
    )
    return ckpt_a, hist_a, ckpt_b, hist_b


def predict(checkpoint: Checkpoint, X: np.ndarray) -> np.ndarray:
    """Deterministic forward pass (dropout off); output is log1p space."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != checkpoint.n_features:
        raise ValueError(
            f"input has {X.shape[-1]} features, checkpoint expects {checkpoint.n_features}"
        )
    pred, _ = model_forward(checkpoint.lstm, checkpoint.dense, X, train_mode=False)
    return pred


def _default_check_sample(config: TrainConfig, n_features=3, horizon=2, n_rows=5):
    """A tiny fixture whose residuals stay clear of the MAE kink."""
    rng = np.random.default_rng(config.seed + 17)
    X = rng.uniform(0.0, 1.0, (n_rows, n_features))
    h0 = rng.uniform(-0.5, 0.5, (n_rows, config.hidden_size))
    c0 = rng.uniform(-0.5, 0.5, (n_rows, config.hidden_size))
    mask = None
    if config.dropout > 0.0:
        mask = rng.random((n_rows, config.hidden_size)) >= config.dropout
    lstm, dense = init_params(n_features, horizon, config)
    pred, _ = model_forward(
        lstm, dense, X,
        dropout=config.dropout, train_mode=config.dropout > 0.0,
        dropout_mask=mask, h0=h0, c0=c0,
    )
    # offsets in [0.5, 1.5] keep |pred - y| away from 0 under the FD probes
    offsets = rng.uniform(0.5, 1.5, pred.shape) * rng.choice([-1.0, 1.0], pred.shape)
    y = pred + offsets
    return X, y, h0, c0, mask


def gradient_check(
    config: TrainConfig | None = None,
    sample: tuple | None = None,
    epsilon: float = 1e-5,
    mutate_grads=None,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Every entry of every parameter array is probed.  ``mutate_grads`` lets
    a test corrupt the analytic gradients to prove the check would catch a
    broken backward pass.  By default the sample injects nonzero initial
    state so the recurrent weights carry real gradient.
    """
    if config is None:
        config = TrainConfig(hidden_size=4, dropout=0.3, seed=0)
    if sample is None:
        sample = _default_check_sample(config)
    X, y, h0, c0, mask = sample

    lstm, dense = init_params(X.shape[-1], y.shape[1], config)
    params = params_as_dict(lstm, dense)
    train_mode = mask is not None

    def loss_now() -> float:
        pred, _ = model_forward(
            lstm, dense, X,
            dropout=config.dropout, train_mode=train_mode,
            dropout_mask=mask, h0=h0, c0=c0,
        )
        return mae_loss_grad(pred, y)[0]

    pred, cache = model_forward(
        lstm, dense, X,
        dropout=config.dropout, train_mode=train_mode,
        dropout_mask=mask, h0=h0, c0=c0,
    )
    _, d_pred = mae_loss_grad(pred, y)
    grads = model_backward(lstm, dense, cache, d_pred)
    if mutate_grads is not None:
        mutate_grads(grads)

    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        g_flat = grads[name].reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + epsilon
            up = loss_now()
            flat[k] = saved - epsilon
            down = loss_now()
            flat[k] = saved
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(g_flat[k]) + abs(numeric), 1e-12)
            worst = max(worst, abs(g_flat[k] - numeric) / denom)
    return worst
