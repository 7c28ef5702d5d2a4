"""Pure-numpy implementations of the per-batch hot kernels.

These mirror the compiled kernels in ``_gatekernels.pyx`` exactly; the
matrix products stay outside (BLAS handles those either way).  Gate blocks
are packed column-wise in the order input, forget, candidate, output.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gate_forward(A, c_prev):
    """Activate packed gate preactivations and advance the cell state.

    A is (N, 4H): columns [0,H) input gate, [H,2H) forget gate, [2H,3H)
    candidate, [3H,4H) output gate.  Returns (gates, c, tanh_c, h).
    """
    H = A.shape[1] // 4
    G = np.empty_like(A)
    G[:, :H] = sigmoid(A[:, :H])
    G[:, H : 2 * H] = sigmoid(A[:, H : 2 * H])
    G[:, 2 * H : 3 * H] = np.tanh(A[:, 2 * H : 3 * H])
    G[:, 3 * H :] = sigmoid(A[:, 3 * H :])
    i, f, g, o = (G[:, :H], G[:, H : 2 * H], G[:, 2 * H : 3 * H], G[:, 3 * H :])
    c = f * c_prev + i * g
    ct = np.tanh(c)
    h = o * ct
    return G, c, ct, h


def gate_backward(G, ct, c_prev, dh, dc):
    """Backward pass through the gate nonlinearities.

    Takes the cached activated gates, tanh of the new cell, the previous
    cell, and the gradients w.r.t. the step's h and c outputs.  Returns
    (dA, dc_prev) where dA matches the packed preactivation layout.
    """
    H = G.shape[1] // 4
    i, f, g, o = (G[:, :H], G[:, H : 2 * H], G[:, 2 * H : 3 * H], G[:, 3 * H :])
    dcell = dc + dh * o * (1.0 - ct * ct)
    dA = np.empty_like(G)
    dA[:, :H] = dcell * g * i * (1.0 - i)
    dA[:, H : 2 * H] = dcell * c_prev * f * (1.0 - f)
    dA[:, 2 * H : 3 * H] = dcell * i * (1.0 - g * g)
    dA[:, 3 * H :] = dh * ct * o * (1.0 - o)
    dc_prev = dcell * f
    return dA, dc_prev


def rmsprop_step(param, grad, accum, lr, rho, eps):
    """In-place RMSprop update: s <- rho*s + (1-rho)*g^2; p -= lr*g/(sqrt(s)+eps)."""
    accum *= rho
    accum += (1.0 - rho) * grad * grad
    param -= lr * grad / (np.sqrt(accum) + eps)
