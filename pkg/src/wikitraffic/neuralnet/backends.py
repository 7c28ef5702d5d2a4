"""Kernel backend selection: compiled extension if built, numpy otherwise.

The environment variable WIKITRAFFIC_BACKEND ("cython" or "python") forces
a backend; ``set_backend`` switches at runtime (used by the benchmark).
"""

from __future__ import annotations

import os

from . import kernels_numpy

_BACKENDS = {"python": kernels_numpy}
try:
    from . import _gatekernels

    _BACKENDS["cython"] = _gatekernels
    _selected = "cython"
except ImportError:
    _selected = "python"

_forced = os.environ.get("WIKITRAFFIC_BACKEND")
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            f"WIKITRAFFIC_BACKEND={_forced!r} unavailable; "
            f"built backends: {sorted(_BACKENDS)}"
        )
    _selected = _forced

_active = _BACKENDS[_selected]


def backend_name() -> str:
    return _selected


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> None:
    global _active, _selected
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; built: {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
    _selected = name


def get_backend(name: str):
    """Return a backend module directly (for parity tests and benchmarks)."""
    return _BACKENDS[name]


def gate_forward(A, c_prev):
    return _active.gate_forward(A, c_prev)


def gate_backward(G, ct, c_prev, dh, dc):
    return _active.gate_backward(G, ct, c_prev, dh, dc)


def rmsprop_step(param, grad, accum, lr, rho, eps):
    return _active.rmsprop_step(param, grad, accum, lr, rho, eps)
