"""Forward and backward passes of the LSTM regressor.

The network is one LSTM layer whose final hidden state feeds a linear
head through inverted dropout.  Inputs may be (N, features) or
(N, timesteps, features); the pipeline uses a single timestep, but the
recurrent machinery is complete and initial state can be injected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .params import DenseParams, LSTMParams

__all__ = ["lstm_forward", "model_forward", "model_backward", "mae_loss_grad"]


@dataclass
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    gates: np.ndarray
    c_tanh: np.ndarray


@dataclass
class LSTMCache:
    steps: list[StepCache]
    h_last: np.ndarray


@dataclass
class ModelCache:
    lstm: LSTMCache
    dropout_mask: np.ndarray | None
    keep_rate: float
    h_dropped: np.ndarray


def _as_steps(X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 2:
        return X[:, None, :]
    if X.ndim == 3:
        return X
    raise ValueError(f"input must be (N, F) or (N, T, F), got shape {X.shape}")


def lstm_forward(
    params: LSTMParams,
    X: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, LSTMCache]:
    """Run the cell over all timesteps; returns the final hidden state.

    Gate equations per step: i = sig(x W_i + h U_i + b_i), f, o likewise,
    g = tanh(x W_g + h U_g + b_g), c = f*c_prev + i*g, h = o*tanh(c).
    Initial state defaults to zeros but every term is always computed.
    """
    X3 = _as_steps(X)
    n, n_steps, n_feat = X3.shape
    if n_feat != params.n_features:
        raise ValueError(f"input has {n_feat} features, weights expect {params.n_features}")
    H = params.hidden_size
    h = np.zeros((n, H)) if h0 is None else np.ascontiguousarray(h0, dtype=np.float64)
    c = np.zeros((n, H)) if c0 is None else np.ascontiguousarray(c0, dtype=np.float64)
    if h.shape != (n, H) or c.shape != (n, H):
        raise ValueError("injected state must have shape (N, hidden)")
    steps = []
    for t in range(n_steps):
        x = X3[:, t, :]
        A = x @ params.w_in + h @ params.u_rec + params.b_gates
        gates, c_new, c_tanh, h_new = backends.gate_forward(A, c)
        steps.append(StepCache(x, h, c, gates, c_tanh))
        h, c = h_new, c_new
    return h, LSTMCache(steps, h)


def lstm_backward(
    params: LSTMParams, cache: LSTMCache, d_h_last: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Backpropagate through time from a gradient on the final hidden state.

    Returns ({w_in, u_rec, b_gates} gradients, dh0, dc0).
    """
    g_w_in = np.zeros_like(params.w_in)
    g_u_rec = np.zeros_like(params.u_rec)
    g_b = np.zeros_like(params.b_gates)
    dh = np.ascontiguousarray(d_h_last, dtype=np.float64)
    dc = np.zeros_like(dh)
    for step in reversed(cache.steps):
        dA, dc = backends.gate_backward(step.gates, step.c_tanh, step.c_prev, dh, dc)
        g_w_in += step.x.T @ dA
        g_u_rec += step.h_prev.T @ dA
        g_b += dA.sum(axis=0)
        dh = dA @ params.u_rec.T
    grads = {"w_in": g_w_in, "u_rec": g_u_rec, "b_gates": g_b}
    return grads, dh, dc


def model_forward(
    lstm: LSTMParams,
    dense: DenseParams,
    X: np.ndarray,
    dropout: float = 0.0,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, ModelCache]:
    """LSTM -> inverted dropout (train only) -> linear head.

    In train mode a fresh mask is drawn from ``rng`` unless one is passed
    in; survivors are scaled by 1/(1-dropout) so inference needs nothing.
    """
    h, lstm_cache = lstm_forward(lstm, X, h0=h0, c0=c0)
    mask = None
    keep = 1.0
    h_dropped = h
    if train_mode and dropout > 0.0:
        keep = 1.0 - dropout
        if dropout_mask is None:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng or an explicit mask")
            dropout_mask = rng.random(h.shape) >= dropout
        mask = dropout_mask
        h_dropped = h * mask / keep
    pred = h_dropped @ dense.w + dense.b
    return pred, ModelCache(lstm_cache, mask, keep, h_dropped)


def model_backward(
    lstm: LSTMParams,
    dense: DenseParams,
    cache: ModelCache,
    d_pred: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of all five parameter arrays from d(loss)/d(predictions)."""
    d_pred = np.asarray(d_pred, dtype=np.float64)
    g_w_out = cache.h_dropped.T @ d_pred
    g_b_out = d_pred.sum(axis=0)
    dh = d_pred @ dense.w.T
    if cache.dropout_mask is not None:
        dh = dh * cache.dropout_mask / cache.keep_rate
    dh = np.ascontiguousarray(dh)
    grads, _, _ = lstm_backward(lstm, cache.lstm, dh)
    grads["w_out"] = g_w_out
    grads["b_out"] = g_b_out
    return grads


def mae_loss_grad(pred: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its (sub)gradient; sign(0) is taken as 0."""
    if pred.shape != y.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {y.shape}")
    diff = pred - y
    loss = float(np.abs(diff).mean())
    return loss, np.sign(diff) / diff.size
