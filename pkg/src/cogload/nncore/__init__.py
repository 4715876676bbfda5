"""Fixed-architecture CNN-RNN classifier: forward pass, analytic gradients,
cross-entropy loss, Adam updates, and text checkpoints."""

from .params import (
    KERNEL_SIZE,
    CONV1_CHANNELS,
    CONV2_CHANNELS,
    HIDDEN_SIZE,
    RNN_LAYERS,
    NUM_CLASSES,
    MIN_TIME,
    SampleBatch,
    Conv1dParams,
    RnnLayerParams,
    RnnParams,
    DenseParams,
    ModelParams,
    init_params,
)
from .network import (
    activation,
    conv1d_forward,
    rnn_forward,
    model_forward,
    cross_entropy,
    model_backward,
    predict,
)
from .optim import AdamState, adam_step
from .training import TrainConfig, fit
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "KERNEL_SIZE",
    "CONV1_CHANNELS",
    "CONV2_CHANNELS",
    "HIDDEN_SIZE",
    "RNN_LAYERS",
    "NUM_CLASSES",
    "MIN_TIME",
    "SampleBatch",
    "Conv1dParams",
    "RnnLayerParams",
    "RnnParams",
    "DenseParams",
    "ModelParams",
    "init_params",
    "activation",
    "conv1d_forward",
    "rnn_forward",
    "model_forward",
    "cross_entropy",
    "model_backward",
    "predict",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "fit",
    "save_checkpoint",
    "load_checkpoint",
]
