"""Versioned text checkpoints with bit-exact round trips.

Layout:

    cogload checkpoint v1
    architecture kernel=3 conv=16,32 hidden=64 layers=2 classes=3
    input_channels <n>
    seed <n>
    param <name> <dim0>[,<dim1>...]
    <one value per line, %.17g>
    ...

%.17g preserves every float64 exactly, so load(save(p)) == p bit for bit.
Parameters appear in the declared order of ModelParams.named_arrays().
"""

from __future__ import annotations

import os
from typing import Dict, List, Tuple, Union

import numpy as np

from ..errors import ParseError, ValidationError
from .params import (
    CONV1_CHANNELS,
    CONV2_CHANNELS,
    HIDDEN_SIZE,
    KERNEL_SIZE,
    NUM_CLASSES,
    RNN_LAYERS,
    Conv1dParams,
    DenseParams,
    ModelParams,
    RnnLayerParams,
    RnnParams,
)

FORMAT_HEADER = "cogload checkpoint v1"
_ARCH_LINE = (
    f"architecture kernel={KERNEL_SIZE} conv={CONV1_CHANNELS},{CONV2_CHANNELS} "
    f"hidden={HIDDEN_SIZE} layers={RNN_LAYERS} classes={NUM_CLASSES}"
)


def save_checkpoint(path: Union[str, os.PathLike], params: ModelParams, seed: int) -> None:
    """Write params to a text checkpoint. The seed is recorded for provenance."""
    lines: List[str] = [FORMAT_HEADER, _ARCH_LINE]
    lines.append(f"input_channels {params.input_channels}")
    lines.append(f"seed {seed}")
    for name, arr in params.named_arrays():
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"param {name} {shape}")
        lines.extend("%.17g" % v for v in arr.ravel())
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_checkpoint(path: Union[str, os.PathLike]) -> Tuple[ModelParams, int]:
    """Read a checkpoint back; returns (params, recorded seed)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise ParseError(f"{path}: line 1: expected header {FORMAT_HEADER!r}")
    if len(lines) < 4:
        raise ParseError(f"{path}: truncated before parameter sections")
    if lines[1] != _ARCH_LINE:
        raise ParseError(f"{path}: line 2: architecture mismatch: {lines[1]!r}")
    input_channels = _int_field(path, 3, lines[2], "input_channels")
    seed = _int_field(path, 4, lines[3], "seed")

    arrays: Dict[str, np.ndarray] = {}
    i = 4
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) != 3 or parts[0] != "param":
            raise ParseError(f"{path}: line {i + 1}: expected 'param <name> <shape>'")
        name = parts[1]
        try:
            shape = tuple(int(d) for d in parts[2].split(","))
        except ValueError:
            raise ParseError(f"{path}: line {i + 1}: bad shape {parts[2]!r}") from None
        size = int(np.prod(shape))
        if i + 1 + size > len(lines):
            raise ParseError(f"{path}: line {i + 1}: {name} truncated, needs {size} values")
        try:
            flat = np.array([float(v) for v in lines[i + 1 : i + 1 + size]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{path}: in {name}: {exc}") from None
        arrays[name] = flat.reshape(shape)
        i += 1 + size

    expected = [
        "conv1.weights", "conv1.bias", "conv2.weights", "conv2.bias",
        "rnn.layer1.w_in", "rnn.layer1.w_rec", "rnn.layer1.bias",
        "rnn.layer2.w_in", "rnn.layer2.w_rec", "rnn.layer2.bias",
        "dense.weights", "dense.bias",
    ]
    missing = [n for n in expected if n not in arrays]
    if missing:
        raise ParseError(f"{path}: missing parameter sections: {', '.join(missing)}")

    params = ModelParams(
        conv1=Conv1dParams(arrays["conv1.weights"], arrays["conv1.bias"]),
        conv2=Conv1dParams(arrays["conv2.weights"], arrays["conv2.bias"]),
        rnn=RnnParams(
            RnnLayerParams(
                arrays["rnn.layer1.w_in"], arrays["rnn.layer1.w_rec"], arrays["rnn.layer1.bias"]
            ),
            RnnLayerParams(
                arrays["rnn.layer2.w_in"], arrays["rnn.layer2.w_rec"], arrays["rnn.layer2.bias"]
            ),
        ),
        dense=DenseParams(arrays["dense.weights"], arrays["dense.bias"]),
        input_channels=input_channels,
    )
    return params, seed


def _int_field(path, lineno: int, line: str, key: str) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise ParseError(f"{path}: line {lineno}: expected '{key} <int>'")
    try:
        value = int(parts[1])
    except ValueError:
        raise ParseError(f"{path}: line {lineno}: {key} is not an integer") from None
    if value < 0:
        raise ValidationError(f"{key} must be non-negative")
    return value
