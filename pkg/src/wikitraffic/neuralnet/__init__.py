"""From-scratch LSTM regressor: parameters, passes, training, checkpoints."""

from .backends import available_backends, backend_name, set_backend
from .checkpoint import Checkpoint, CheckpointFormatError, load_checkpoint, save_checkpoint
from .model import lstm_forward, mae_loss_grad, model_backward, model_forward
from .params import DenseParams, LSTMParams, TrainConfig, init_params, params_as_dict
from .training import (
    RMSPropState,
    TrainingDivergedError,
    gradient_check,
    predict,
    rmsprop_update,
    train,
    train_both_models,
)

__all__ = [
    "available_backends",
    "backend_name",
    "set_backend",
    "Checkpoint",
    "CheckpointFormatError",
    "load_checkpoint",
    "save_checkpoint",
    "lstm_forward",
    "mae_loss_grad",
    "model_backward",
    "model_forward",
    "DenseParams",
    "LSTMParams",
    "TrainConfig",
    "init_params",
    "params_as_dict",
    "RMSPropState",
    "TrainingDivergedError",
    "gradient_check",
    "predict",
    "rmsprop_update",
    "train",
    "train_both_models",
]
