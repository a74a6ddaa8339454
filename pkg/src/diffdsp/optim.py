"""ADAM with stepwise exponential learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    decay_rate: float = 0.98
    decay_interval: int = 10_000
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def effective_lr(self, step: int | None = None) -> float:
        """Learning rate applied at ``step`` (defaults to the next update)."""
        step = self.step if step is None else step
        return self.learning_rate * self.decay_rate ** (step // self.decay_interval)


def adam_step(
    state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> list[np.ndarray]:
    """One ADAM update. Returns new parameter arrays; ``state`` is advanced in place."""
    if len(params) != len(grads):
        raise ValueError(f"got {len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ValueError(f"shape mismatch: param {np.shape(p)} vs grad {np.shape(g)}")
    if not state.m:
        state.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p, dtype=np.float64) for p in params]
    elif len(state.m) != len(params):
        raise ValueError("parameter list changed between steps")

    lr = state.effective_lr()
    t = state.step + 1
    bc1 = 1.0 - BETA1**t
    bc2 = 1.0 - BETA2**t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if state.m[i].shape != np.shape(p):
            raise ValueError("moment shape does not match parameter")
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + EPSILON))
    state.step = t
    return out
