# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels for the LSTM gates and RMSprop.

Drop-in replacements for ``kernels_numpy``: same signatures, same packed
gate layout (input, forget, candidate, output).  Fusing the elementwise
chains into single passes avoids the temporaries numpy allocates per op.
"""

from libc.math cimport exp, sqrt, tanh

import numpy as np


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def gate_forward(double[:, ::1] A, double[:, ::1] c_prev):
    cdef Py_ssize_t n = A.shape[0], H = A.shape[1] // 4
    G_arr = np.empty((n, 4 * H), dtype=np.float64)
    c_arr = np.empty((n, H), dtype=np.float64)
    ct_arr = np.empty((n, H), dtype=np.float64)
    h_arr = np.empty((n, H), dtype=np.float64)
    cdef double[:, ::1] G = G_arr, c = c_arr, ct = ct_arr, h = h_arr
    cdef Py_ssize_t r, j
    cdef double gi, gf, gg, go, cc
    with nogil:
        for r in range(n):
            for j in range(H):
                gi = _sigmoid(A[r, j])
                gf = _sigmoid(A[r, H + j])
                gg = tanh(A[r, 2 * H + j])
                go = _sigmoid(A[r, 3 * H + j])
                cc = gf * c_prev[r, j] + gi * gg
                G[r, j] = gi
                G[r, H + j] = gf
                G[r, 2 * H + j] = gg
                G[r, 3 * H + j] = go
                c[r, j] = cc
                ct[r, j] = tanh(cc)
                h[r, j] = go * ct[r, j]
    return G_arr, c_arr, ct_arr, h_arr


def gate_backward(double[:, ::1] G, double[:, ::1] ct, double[:, ::1] c_prev,
                  double[:, ::1] dh, double[:, ::1] dc):
    cdef Py_ssize_t n = G.shape[0], H = G.shape[1] // 4
    dA_arr = np.empty((n, 4 * H), dtype=np.float64)
    dcp_arr = np.empty((n, H), dtype=np.float64)
    cdef double[:, ::1] dA = dA_arr, dcp = dcp_arr
    cdef Py_ssize_t r, j
    cdef double gi, gf, gg, go, tc, dcell
    with nogil:
        for r in range(n):
            for j in range(H):
                gi = G[r, j]
                gf = G[r, H + j]
                gg = G[r, 2 * H + j]
                go = G[r, 3 * H + j]
                tc = ct[r, j]
                dcell = dc[r, j] + dh[r, j] * go * (1.0 - tc * tc)
                dA[r, j] = dcell * gg * gi * (1.0 - gi)
                dA[r, H + j] = dcell * c_prev[r, j] * gf * (1.0 - gf)
                dA[r, 2 * H + j] = dcell * gi * (1.0 - gg * gg)
                dA[r, 3 * H + j] = dh[r, j] * tc * go * (1.0 - go)
                dcp[r, j] = dcell * gf
    return dA_arr, dcp_arr


def rmsprop_step(double[::1] param, double[::1] grad, double[::1] accum,
                 double lr, double rho, double eps):
    cdef Py_ssize_t k, n = param.shape[0]
    cdef double g
    with nogil:
        for k in range(n):
            g = grad[k]
            accum[k] = rho * accum[k] + (1.0 - rho) * g * g
            param[k] -= lr * g / (sqrt(accum[k]) + eps)
