"""Parameter containers, training configuration and initialization.

Gate weights are stored packed: one (features, 4*hidden) input kernel and
one (hidden, 4*hidden) recurrent kernel, columns ordered input gate,
forget gate, cell candidate, output gate.  Per-gate views are exposed as
properties.  Initialization is Glorot-uniform per gate block with the
forget-gate bias at 1, drawn in a fixed order so a seed pins every weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GATE_ORDER = ("input", "forget", "cell", "output")


@dataclass
class TrainConfig:
    """Hyperparameters of the LSTM regressor and its training loop."""

    epochs: int = 10
    dropout: float = 0.3
    batch_size: int = 32  # 0 means full batch
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-7
    seed: int = 0
    hidden_size: int = 256

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 0:
            raise ValueError("batch size must be >= 0 (0 = full batch)")
        if self.hidden_size < 1:
            raise ValueError("hidden size must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "dropout": self.dropout,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "rho": self.rho,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "hidden_size": self.hidden_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _gate_view(packed: np.ndarray, gate: str) -> np.ndarray:
    h = packed.shape[1] // 4
    k = GATE_ORDER.index(gate)
    return packed[:, k * h : (k + 1) * h]


@dataclass
class LSTMParams:
    """Packed LSTM cell weights: input kernel, recurrent kernel, gate biases."""

    w_in: np.ndarray  # (features, 4*hidden)
    u_rec: np.ndarray  # (hidden, 4*hidden)
    b_gates: np.ndarray  # (4*hidden,)

    def __post_init__(self):
        H = self.hidden_size
        if self.w_in.shape[1] != 4 * H or self.b_gates.shape != (4 * H,):
            raise ValueError("inconsistent LSTM parameter shapes")
        if self.u_rec.shape != (H, 4 * H):
            raise ValueError("recurrent kernel must be (hidden, 4*hidden)")

    @property
    def n_features(self) -> int:
        return self.w_in.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.u_rec.shape[0]

    def w(self, gate: str) -> np.ndarray:
        """Input-to-hidden weights of one gate, shape (features, hidden)."""
        return _gate_view(self.w_in, gate)

    def u(self, gate: str) -> np.ndarray:
        """Hidden-to-hidden weights of one gate, shape (hidden, hidden)."""
        return _gate_view(self.u_rec, gate)

    def bias(self, gate: str) -> np.ndarray:
        h = self.hidden_size
        k = GATE_ORDER.index(gate)
        return self.b_gates[k * h : (k + 1) * h]

    @property
    def parameter_count(self) -> int:
        return self.w_in.size + self.u_rec.size + self.b_gates.size

    def copy(self) -> "LSTMParams":
        return LSTMParams(self.w_in.copy(), self.u_rec.copy(), self.b_gates.copy())


@dataclass
class DenseParams:
    """Linear output head mapping the hidden state to the horizon."""

    w: np.ndarray  # (hidden, horizon)
    b: np.ndarray  # (horizon,)

    def __post_init__(self):
        if self.b.shape != (self.w.shape[1],):
            raise ValueError("dense bias length must match output width")

    @property
    def horizon(self) -> int:
        return self.w.shape[1]

    @property
    def parameter_count(self) -> int:
        return self.w.size + self.b.size

    def copy(self) -> "DenseParams":
        return DenseParams(self.w.copy(), self.b.copy())


def init_params(
    n_features: int,
    horizon: int,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[LSTMParams, DenseParams]:
    """Draw fresh parameters; deterministic for a given seed.

    Draw order: input kernel gate blocks, recurrent kernel gate blocks,
    then the dense kernel.  Biases are zero except the forget gate's at 1.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    H = config.hidden_size
    w_in = np.empty((n_features, 4 * H))
    u_rec = np.empty((H, 4 * H))
    lim_in = math.sqrt(6.0 / (n_features + H))
    lim_rec = math.sqrt(6.0 / (H + H))
    for k in range(4):
        w_in[:, k * H : (k + 1) * H] = rng.uniform(-lim_in, lim_in, (n_features, H))
    for k in range(4):
        u_rec[:, k * H : (k + 1) * H] = rng.uniform(-lim_rec, lim_rec, (H, H))
    b_gates = np.zeros(4 * H)
    b_gates[H : 2 * H] = 1.0  # forget gate starts open
    lim_out = math.sqrt(6.0 / (H + horizon))
    w_out = rng.uniform(-lim_out, lim_out, (H, horizon))
    b_out = np.zeros(horizon)
    return LSTMParams(w_in, u_rec, b_gates), DenseParams(w_out, b_out)


def params_as_dict(lstm: LSTMParams, dense: DenseParams) -> dict[str, np.ndarray]:
    """Named views of every parameter array (shared storage, not copies)."""
    return {
        "w_in": lstm.w_in,
        "u_rec": lstm.u_rec,
        "b_gates": lstm.b_gates,
        "w_out": dense.w,
        "b_out": dense.b,
    }
