"""Forward pass, analytic gradients, and loss for the CNN-RNN classifier.

All gradients are hand-derived for this fixed architecture; there is no
autodiff graph. The backward pass runs backpropagation through time across
both RNN layers and through both valid convolutions.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, NumericError, ValidationError
from .params import (
    HIDDEN_SIZE,
    KERNEL_SIZE,
    Conv1dParams,
    DenseParams,
    ModelParams,
    RnnLayerParams,
    RnnParams,
    SampleBatch,
)

_ACTIVATIONS = ("relu", "sigmoid", "tanh")


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    """Elementwise relu, sigmoid, or tanh. Rejects non-finite input."""
    if kind not in _ACTIVATIONS:
        raise ValidationError(f"unknown activation {kind!r}, expected one of {_ACTIVATIONS}")
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise NumericError("activation input contains non-finite values")
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    return _sigmoid(x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to keep exp() out of overflow territory.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def conv1d_forward(x: np.ndarray, params: Conv1dParams) -> np.ndarray:
    """Valid (no padding) 1D convolution across input channels.

    x: (batch, in_channels, time) -> (batch, out_channels, time - kernel + 1),
    with output[b, o, i] = sum_c sum_j x[b, c, i + j] * w[o, c, j] + bias[o].
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"input must be (batch, channels, time), got {x.ndim} axes")
    if x.shape[1] != params.in_channels:
        raise DimensionError(
            f"channels axis has {x.shape[1]}, kernel expects {params.in_channels}"
        )
    if x.shape[2] < KERNEL_SIZE:
        raise DimensionError(
            f"time axis has {x.shape[2]} samples, kernel needs >= {KERNEL_SIZE}"
        )
    windows = sliding_window_view(x, KERNEL_SIZE, axis=2)  # (b, c, t_out, k)
    return np.einsum("bctk,ock->bot", windows, params.weights) + params.bias[:, None]


def _conv1d_backward(
    dy: np.ndarray, x: np.ndarray, params: Conv1dParams, need_dx: bool
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Gradients of a valid convolution given dL/dy."""
    windows = sliding_window_view(x, KERNEL_SIZE, axis=2)
    dw = np.einsum("bot,bctk->ock", dy, windows)
    db = dy.sum(axis=(0, 2))
    dx = None
    if need_dx:
        dx = np.zeros_like(x)
        t_out = dy.shape[2]
        for j in range(KERNEL_SIZE):
            # dx[b, c, i + j] += sum_o dy[b, o, i] * w[o, c, j]
            dx[:, :, j : j + t_out] += np.einsum("bot,oc->bct", dy, params.weights[:, :, j])
    return dw, db, dx


def rnn_forward(
    seq: np.ndarray, params: RnnParams, h0: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Two stacked Elman layers, h_t = tanh(W_in x_t + W_rec h_{t-1} + b).

    seq: (batch, time, features) with features matching layer 1's input size.
    Returns (outputs, final_hidden): the layer-2 hidden states over time,
    shape (batch, time, 64), and the stacked final states (2, batch, 64).
    Hidden state starts at zero (h0 is accepted only as explicit zeros).
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 3:
        raise DimensionError(f"sequence must be (batch, time, features), got {seq.ndim} axes")
    if seq.shape[2] != params.layer1.in_size:
        raise DimensionError(
            f"features axis has {seq.shape[2]}, layer 1 expects {params.layer1.in_size}"
        )
    if h0 is not None and np.any(h0):
        raise ValidationError("initial hidden state must be zero")
    hs = _rnn_layers_forward(seq, params)
    final = np.stack([hs[0][:, -1, :], hs[1][:, -1, :]], axis=0)
    return hs[1], final


def _rnn_layers_forward(seq: np.ndarray, params: RnnParams):
    """Hidden-state sequences [(b, t, 64), (b, t, 64)] for both layers."""
    batch, steps, _ = seq.shape
    layer_states = []
    x = seq
    for layer in params.layers:
        # Input contribution for every step in one matmul; recurrence loops.
        xin = x.reshape(batch * steps, -1) @ layer.w_in.T
        xin = xin.reshape(batch, steps, HIDDEN_SIZE) + layer.bias
        h = np.zeros((batch, HIDDEN_SIZE))
        states = np.empty((batch, steps, HIDDEN_SIZE))
        w_rec_t = layer.w_rec.T
        for t in range(steps):
            h = np.tanh(xin[:, t] + h @ w_rec_t)
            states[:, t] = h
        layer_states.append(states)
        x = states
    return layer_states


def model_forward(
    batch: SampleBatch, params: ModelParams, return_cache: bool = False
):
    """Raw logits (batch, 3); no output nonlinearity.

    conv1 -> relu -> conv2 -> relu -> (batch, time', 32) -> two-layer RNN ->
    last hidden state of the top layer -> dense readout.
    """
    x = batch.data
    if x.shape[1] != params.input_channels:
        raise DimensionError(
            f"channels axis has {x.shape[1]}, model expects {params.input_channels}"
        )
    a1 = conv1d_forward(x, params.conv1)
    r1 = np.maximum(a1, 0.0)
    a2 = conv1d_forward(r1, params.conv2)
    r2 = np.maximum(a2, 0.0)
    seq = np.ascontiguousarray(r2.transpose(0, 2, 1))  # (b, t', 32)
    h1, h2 = _rnn_layers_forward(seq, params.rnn)
    last = h2[:, -1, :]
    logits = last @ params.dense.weights.T + params.dense.bias
    if not return_cache:
        return logits
    cache = {"x": x, "a1": a1, "r1": r1, "a2": a2, "seq": seq, "h1": h1, "h2": h2}
    return logits, cache


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    loss = mean_i(-log softmax(logits_i)[labels_i]);
    dloss/dlogits = (softmax - onehot) / batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (batch, classes), got {logits.ndim} axes")
    batch, n_classes = logits.shape
    if labels.shape != (batch,):
        raise DimensionError(f"labels axis has {labels.shape}, batch axis has {batch}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValidationError(f"labels must lie in [0, {n_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    softmax = exp / exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    idx = np.arange(batch)
    loss = float(-log_probs[idx, labels].mean())
    grad = softmax.copy()
    grad[idx, labels] -= 1.0
    grad /= batch
    return loss, grad


def _rnn_layer_backward(dout, states, inputs, layer):
    """BPTT through one Elman layer.

    dout:   (b, t, 64) upstream gradient w.r.t. this layer's hidden states
    states: (b, t, 64) forward hidden states
    inputs: (b, t, in) forward inputs
    Returns (dw_in, dw_rec, dbias, dinputs).
    """
    batch, steps, _ = states.shape
    dw_in = np.zeros_like(layer.w_in)
    dw_rec = np.zeros_like(layer.w_rec)
    dbias = np.zeros_like(layer.bias)
    dinputs = np.empty_like(inputs)
    carry = np.zeros((batch, HIDDEN_SIZE))
    for t in range(steps - 1, -1, -1):
        dh = dout[:, t] + carry
        da = dh * (1.0 - states[:, t] ** 2)
        dw_in += da.T @ inputs[:, t]
        if t > 0:
            dw_rec += da.T @ states[:, t - 1]
        # t == 0 contributes nothing: previous hidden state is the zero vector
        dbias += da.sum(axis=0)
        dinputs[:, t] = da @ layer.w_in
        carry = da @ layer.w_rec
    return dw_in, dw_rec, dbias, dinputs


def _backward_from_cache(
    dlogits: np.ndarray, cache: Dict[str, np.ndarray], params: ModelParams
) -> ModelParams:
    """Analytic gradients for every parameter given dL/dlogits."""
    h1, h2, seq = cache["h1"], cache["h2"], cache["seq"]
    last = h2[:, -1, :]
    d_dense_w = dlogits.T @ last
    d_dense_b = dlogits.sum(axis=0)

    # Only the last layer-2 state feeds the readout.
    dout2 = np.zeros_like(h2)
    dout2[:, -1, :] = dlogits @ params.dense.weights
    dwx2, dwh2, db2, dout1 = _rnn_layer_backward(dout2, h2, h1, params.rnn.layer2)
    dwx1, dwh1, db1, dseq = _rnn_layer_backward(dout1, h1, seq, params.rnn.layer1)

    dr2 = dseq.transpose(0, 2, 1)
    da2 = dr2 * (cache["a2"] > 0)
    dw2, db2c, dr1 = _conv1d_backward(da2, cache["r1"], params.conv2, need_dx=True)
    da1 = dr1 * (cache["a1"] > 0)
    dw1, db1c, _ = _conv1d_backward(da1, cache["x"], params.conv1, need_dx=False)

    return ModelParams(
        conv1=Conv1dParams(dw1, db1c),
        conv2=Conv1dParams(dw2, db2c),
        rnn=RnnParams(
            RnnLayerParams(dwx1, dwh1, db1),
            RnnLayerParams(dwx2, dwh2, db2),
        ),
        dense=DenseParams(d_dense_w, d_dense_b),
        input_channels=params.input_channels,
    )


def model_backward(batch: SampleBatch, params: ModelParams) -> ModelParams:
    """Gradient of the mean cross-entropy loss w.r.t. every parameter.

    Returns a ModelParams holding gradients in place of weights.
    """
    if batch.labels is None:
        raise ValidationError("backward pass needs labels")
    _, grads = loss_and_gradients(batch, params)
    return grads


def loss_and_gradients(batch: SampleBatch, params: ModelParams) -> Tuple[float, ModelParams]:
    if batch.labels is None:
        raise ValidationError("loss needs labels")
    logits, cache = model_forward(batch, params, return_cache=True)
    loss, dlogits = cross_entropy(logits, batch.labels)
    return loss, _backward_from_cache(dlogits, cache, params)


def predict(batch: SampleBatch, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Argmax labels and per-class sigmoid scores.

    Ties in the argmax resolve to the lowest class index. The sigmoid scores
    are for display and AUC input only; they are not softmax probabilities.
    """
    logits = model_forward(batch, params)
    labels = np.argmax(logits, axis=1)
    scores = _sigmoid(logits)
    return labels, scores
