"""Minimal tensor/backprop machinery and the raster-plus-state trajectory predictor."""

from .model import ModelConfig, ModelOutput, forward, backward, init_params
from .losses import loss_point, loss_nll
from .optim import AdamConfig, AdamState, adam_step, staircase_lr
from .train import TrainOptions, train_model

__all__ = [
    "AdamConfig",
    "AdamState",
    "ModelConfig",
    "ModelOutput",
    "TrainOptions",
    "adam_step",
    "backward",
    "forward",
    "init_params",
    "loss_nll",
    "loss_point",
    "staircase_lr",
    "train_model",
]
