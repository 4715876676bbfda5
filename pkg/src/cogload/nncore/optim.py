"""Adam optimizer with bias correction.

update: m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2;
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)
with m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t). Epsilon sits outside
the square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import NumericError, ValidationError
from .params import ModelParams

DEFAULT_LEARNING_RATE = 0.001
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates per parameter array, plus the step count."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState) -> None:
    """Apply one Adam update in place. Mutates params and state."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for (name, p), (gname, g) in zip(params.named_arrays(), grads.named_arrays()):
        if name != gname or p.shape != g.shape:
            raise ValidationError(f"gradient for {name} does not match parameter layout")
        if not np.isfinite(g).all():
            raise NumericError(f"gradient for {name} contains non-finite values")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
