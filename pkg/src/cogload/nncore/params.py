"""Parameter containers and initialization for the fixed CNN-RNN architecture.

The network is deliberately not configurable beyond the input channel count:
two valid 1D convolutions (kernel 3, output channels 16 then 32), a two-layer
tanh RNN with hidden size 64, and a dense readout over 3 classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from ..errors import DimensionError, NumericError, ValidationError

KERNEL_SIZE = 3
CONV1_CHANNELS = 16
CONV2_CHANNELS = 32
HIDDEN_SIZE = 64
RNN_LAYERS = 2
NUM_CLASSES = 3

# Two valid kernel-3 convolutions each shave off KERNEL_SIZE - 1 samples.
MIN_TIME = 2 * (KERNEL_SIZE - 1) + 1


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} contains non-finite values")


@dataclass
class SampleBatch:
    """A batch of windows: data (batch, channels, time), labels in {0, 1, 2}.

    labels may be omitted for prediction-only batches.
    """

    data: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DimensionError(
                f"data must be (batch, channels, time), got {self.data.ndim} axes"
            )
        batch, _, time = self.data.shape
        if batch < 1:
            raise DimensionError("batch axis is empty")
        if time < MIN_TIME:
            raise DimensionError(
                f"time axis has {time} samples, need >= {MIN_TIME} "
                f"for two kernel-{KERNEL_SIZE} convolutions"
            )
        _check_finite("batch data", self.data)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (batch,):
                raise DimensionError(
                    f"labels axis has length {self.labels.shape[0] if self.labels.ndim == 1 else self.labels.shape}, "
                    f"batch axis has {batch}"
                )
            if self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES:
                raise ValidationError("labels must lie in {0, 1, 2}")

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]


@dataclass
class Conv1dParams:
    """weights (out_channels, in_channels, kernel), bias (out_channels)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 3:
            raise DimensionError("conv weights must have 3 axes (out, in, kernel)")
        if self.weights.shape[2] != KERNEL_SIZE:
            raise DimensionError(
                f"kernel axis has {self.weights.shape[2]}, expected {KERNEL_SIZE}"
            )
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias axis has {self.bias.shape}, expected ({self.weights.shape[0]},)"
            )
        _check_finite("conv weights", self.weights)
        _check_finite("conv bias", self.bias)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


@dataclass
class RnnLayerParams:
    """One Elman layer: w_in (hidden, in), w_rec (hidden, hidden), bias (hidden)."""

    w_in: np.ndarray
    w_rec: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=np.float64)
        self.w_rec = np.asarray(self.w_rec, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        hidden = self.w_in.shape[0] if self.w_in.ndim == 2 else -1
        if hidden != HIDDEN_SIZE:
            raise DimensionError(f"hidden axis has {hidden}, expected {HIDDEN_SIZE}")
        if self.w_rec.shape != (HIDDEN_SIZE, HIDDEN_SIZE):
            raise DimensionError(
                f"recurrent weights are {self.w_rec.shape}, expected "
                f"({HIDDEN_SIZE}, {HIDDEN_SIZE})"
            )
        if self.bias.shape != (HIDDEN_SIZE,):
            raise DimensionError(f"bias axis has {self.bias.shape}, expected ({HIDDEN_SIZE},)")
        for name, arr in (("w_in", self.w_in), ("w_rec", self.w_rec), ("bias", self.bias)):
            _check_finite(f"rnn {name}", arr)

    @property
    def in_size(self) -> int:
        return self.w_in.shape[1]


@dataclass
class RnnParams:
    """Two stacked layers; layer 1 consumes 32 features, layer 2 consumes 64."""

    layer1: RnnLayerParams
    layer2: RnnLayerParams

    def __post_init__(self):
        if self.layer1.in_size != CONV2_CHANNELS:
            raise DimensionError(
                f"layer 1 input axis has {self.layer1.in_size}, expected {CONV2_CHANNELS}"
            )
        if self.layer2.in_size != HIDDEN_SIZE:
            raise DimensionError(
                f"layer 2 input axis has {self.layer2.in_size}, expected {HIDDEN_SIZE}"
            )

    @property
    def layers(self) -> Tuple[RnnLayerParams, RnnLayerParams]:
        return (self.layer1, self.layer2)


@dataclass
class DenseParams:
    """Readout: weights (num_classes, hidden), bias (num_classes)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.shape != (NUM_CLASSES, HIDDEN_SIZE):
            raise DimensionError(
                f"dense weights are {self.weights.shape}, expected "
                f"({NUM_CLASSES}, {HIDDEN_SIZE})"
            )
        if self.bias.shape != (NUM_CLASSES,):
            raise DimensionError(f"dense bias axis has {self.bias.shape}, expected ({NUM_CLASSES},)")
        _check_finite("dense weights", self.weights)
        _check_finite("dense bias", self.bias)


@dataclass
class ModelParams:
    """All weights of the Conv-Conv-RNN-Dense network."""

    conv1: Conv1dParams
    conv2: Conv1dParams
    rnn: RnnParams
    dense: DenseParams
    input_channels: int

    def __post_init__(self):
        if self.input_channels < 1:
            raise ValidationError("input_channels must be positive")
        if self.conv1.in_channels != self.input_channels:
            raise DimensionError(
                f"conv1 input axis has {self.conv1.in_channels}, expected {self.input_channels}"
            )
        if self.conv1.out_channels != CONV1_CHANNELS:
            raise DimensionError(
                f"conv1 output axis has {self.conv1.out_channels}, expected {CONV1_CHANNELS}"
            )
        if self.conv2.in_channels != CONV1_CHANNELS:
            raise DimensionError(
                f"conv2 input axis has {self.conv2.in_channels}, expected {CONV1_CHANNELS}"
            )
        if self.conv2.out_channels != CONV2_CHANNELS:
            raise DimensionError(
                f"conv2 output axis has {self.conv2.out_channels}, expected {CONV2_CHANNELS}"
            )

    def named_arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        """Yield (name, array) pairs in the declared checkpoint order."""
        yield "conv1.weights", self.conv1.weights
        yield "conv1.bias", self.conv1.bias
        yield "conv2.weights", self.conv2.weights
        yield "conv2.bias", self.conv2.bias
        yield "rnn.layer1.w_in", self.rnn.layer1.w_in
        yield "rnn.layer1.w_rec", self.rnn.layer1.w_rec
        yield "rnn.layer1.bias", self.rnn.layer1.bias
        yield "rnn.layer2.w_in", self.rnn.layer2.w_in
        yield "rnn.layer2.w_rec", self.rnn.layer2.w_rec
        yield "rnn.layer2.bias", self.rnn.layer2.bias
        yield "dense.weights", self.dense.weights
        yield "dense.bias", self.dense.bias

    def copy(self) -> "ModelParams":
        return ModelParams(
            conv1=Conv1dParams(self.conv1.weights.copy(), self.conv1.bias.copy()),
            conv2=Conv1dParams(self.conv2.weights.copy(), self.conv2.bias.copy()),
            rnn=RnnParams(
                RnnLayerParams(
                    self.rnn.layer1.w_in.copy(),
                    self.rnn.layer1.w_rec.copy(),
                    self.rnn.layer1.bias.copy(),
                ),
                RnnLayerParams(
                    self.rnn.layer2.w_in.copy(),
                    self.rnn.layer2.w_rec.copy(),
                    self.rnn.layer2.bias.copy(),
                ),
            ),
            dense=DenseParams(self.dense.weights.copy(), self.dense.bias.copy()),
            input_channels=self.input_channels,
        )

    def num_parameters(self) -> int:
        return sum(arr.size for _, arr in self.named_arrays())


def init_params(input_channels: int, seed: int) -> ModelParams:
    """Initialize all layers uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Convolutions use fan_in = in_channels * kernel; the RNN and dense layers
    use fan_in = hidden size. Draw order is the declared parameter order, so
    a fixed seed gives bit-identical parameters across runs.
    """
    if input_channels < 1:
        raise ValidationError("input_channels must be positive")
    rng = np.random.default_rng(seed)

    def uniform(bound, shape):
        return rng.uniform(-bound, bound, size=shape)

    b1 = 1.0 / np.sqrt(input_channels * KERNEL_SIZE)
    conv1 = Conv1dParams(
        uniform(b1, (CONV1_CHANNELS, input_channels, KERNEL_SIZE)),
        uniform(b1, (CONV1_CHANNELS,)),
    )
    b2 = 1.0 / np.sqrt(CONV1_CHANNELS * KERNEL_SIZE)
    conv2 = Conv1dParams(
        uniform(b2, (CONV2_CHANNELS, CONV1_CHANNELS, KERNEL_SIZE)),
        uniform(b2, (CONV2_CHANNELS,)),
    )
    bh = 1.0 / np.sqrt(HIDDEN_SIZE)
    layer1 = RnnLayerParams(
        uniform(bh, (HIDDEN_SIZE, CONV2_CHANNELS)),
        uniform(bh, (HIDDEN_SIZE, HIDDEN_SIZE)),
        uniform(bh, (HIDDEN_SIZE,)),
    )
    layer2 = RnnLayerParams(
        uniform(bh, (HIDDEN_SIZE, HIDDEN_SIZE)),
        uniform(bh, (HIDDEN_SIZE, HIDDEN_SIZE)),
        uniform(bh, (HIDDEN_SIZE,)),
    )
    dense = DenseParams(
        uniform(bh, (NUM_CLASSES, HIDDEN_SIZE)),
        uniform(bh, (NUM_CLASSES,)),
    )
    return ModelParams(conv1, conv2, RnnParams(layer1, layer2), dense, input_channels)
