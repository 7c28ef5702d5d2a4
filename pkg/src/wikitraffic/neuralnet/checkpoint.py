"""Best-on-validation snapshots and their on-disk container.

The file format is a small versioned binary: magic + version, a JSON
metadata block (config, epoch, validation loss, array shapes, optimizer
state presence), then the raw little-endian float64 array payloads in a
fixed order.  Writing is fully deterministic: identical checkpoints give
identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .params import DenseParams, LSTMParams, TrainConfig

MAGIC = b"WTLSTM\x00"
FORMAT_VERSION = 1

_ARRAY_ORDER = ("w_in", "u_rec", "b_gates", "w_out", "b_out")


class CheckpointFormatError(ValueError):
    """File is not a readable checkpoint of a supported version."""


@dataclass
class Checkpoint:
    """Model parameters plus the context needed to reuse them."""

    lstm: LSTMParams
    dense: DenseParams
    config: TrainConfig
    epoch: int
    val_loss: float
    scaler_ref: str | None = None
    opt_state: dict[str, np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.lstm.n_features

    @property
    def horizon(self) -> int:
        return self.dense.horizon


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = {
        "w_in": ckpt.lstm.w_in,
        "u_rec": ckpt.lstm.u_rec,
        "b_gates": ckpt.lstm.b_gates,
        "w_out": ckpt.dense.w,
        "b_out": ckpt.dense.b,
    }
    opt_names = []
    if ckpt.opt_state:
        for name in _ARRAY_ORDER:
            opt_names.append(f"opt_{name}")
            arrays[f"opt_{name}"] = ckpt.opt_state[name]
    meta = {
        "version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "val_loss": ckpt.val_loss,
        "scaler_ref": ckpt.scaler_ref,
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "opt_state": opt_names,
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in list(_ARRAY_ORDER) + opt_names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointFormatError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointFormatError(
                f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
            )
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        arrays = {}
        for name in list(_ARRAY_ORDER) + list(meta["opt_state"]):
            shape = tuple(meta["shapes"][name])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointFormatError(f"{path}: truncated array payload for {name}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
        if fh.read(1):
            raise CheckpointFormatError(f"{path}: trailing bytes after payload")

    config = TrainConfig.from_dict(meta["config"])
    try:
        lstm = LSTMParams(arrays["w_in"], arrays["u_rec"], arrays["b_gates"])
        dense = DenseParams(arrays["w_out"], arrays["b_out"])
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: inconsistent shapes ({exc})") from None
    if lstm.hidden_size != config.hidden_size:
        raise CheckpointFormatError(
            f"{path}: hidden size {lstm.hidden_size} does not match config "
            f"{config.hidden_size}"
        )
    if dense.w.shape[0] != lstm.hidden_size:
        raise CheckpointFormatError(f"{path}: dense input width mismatch")
    if not np.isfinite(meta["val_loss"]):
        raise CheckpointFormatError(f"{path}: non-finite validation loss")
    opt_state = None
    if meta["opt_state"]:
        opt_state = {name: arrays[f"opt_{name}"] for name in _ARRAY_ORDER}
    return Checkpoint(
        lstm,
        dense,
        config,
        int(meta["epoch"]),
        float(meta["val_loss"]),
        meta.get("scaler_ref"),
        opt_state,
    )
