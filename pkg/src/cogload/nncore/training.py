"""Minibatch training loop for the CNN-RNN classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import DivergenceError, NumericError, ValidationError
from .network import loss_and_gradients
from .optim import DEFAULT_LEARNING_RATE, AdamState, adam_step
from .params import ModelParams, SampleBatch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 32
    lr: float = DEFAULT_LEARNING_RATE
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


def fit(
    train: SampleBatch, cfg: TrainConfig, params: ModelParams
) -> Tuple[ModelParams, List[float]]:
    """Train on the batch, returning updated params and per-epoch mean loss.

    Each epoch shuffles sample order with an RNG seeded from cfg.seed, walks
    the data in minibatches of cfg.batch_size (last one may be short), and
    applies one Adam step per minibatch. The input params are not mutated.
    A non-finite epoch loss aborts with DivergenceError carrying the epoch.
    """
    if train.labels is None:
        raise ValidationError("training batch needs labels")
    params = params.copy()
    state = AdamState(learning_rate=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    n = train.batch_size
    history: List[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            mb = SampleBatch(train.data[idx], train.labels[idx])
            try:
                loss, grads = loss_and_gradients(mb, params)
            except (FloatingPointError, NumericError) as exc:
                raise DivergenceError(epoch, str(exc)) from exc
            if not np.isfinite(loss):
                raise DivergenceError(epoch, f"minibatch loss is {loss!r}")
            try:
                adam_step(params, grads, state)
            except NumericError as exc:
                raise DivergenceError(epoch, str(exc)) from exc
            total += loss * len(idx)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise DivergenceError(epoch, f"epoch loss is {mean_loss!r}")
        history.append(mean_loss)
        if epoch == 0 or (epoch + 1) % 50 == 0:
            log.debug("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, mean_loss)
    return params, history
