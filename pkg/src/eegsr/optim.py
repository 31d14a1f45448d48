"""AdamW with decoupled weight decay.

Decay multiplies each parameter by (1 - lr * wd) before the moment-based
update is applied, so regularization never enters the moment estimates.
The loss log-variance scalars are excluded from decay: shrinking them
toward zero would bias the learned loss weighting, not regularize it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .tensor import Tensor


@dataclass
class TrainConfig:
    batch_size: int = 36
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.5
    dropout: float = 0.5
    epochs: int = 10
    seed: int = 0
    eps: float = 1e-8
    clip_norm: float = 0.0  # 0 disables clipping

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not (0 < self.lr and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("invalid optimizer rates")
        if not (0 <= self.weight_decay and 0 <= self.dropout < 1 and self.eps > 0):
            raise ValueError("invalid regularization settings")


@dataclass
class AdamWState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamWState":
        return cls(m=[np.zeros_like(p.values) for p in params],
                   v=[np.zeros_like(p.values) for p in params])


def adamw_step(params: list[Tensor], grads: list[np.ndarray], state: AdamWState,
               cfg: TrainConfig, no_decay: frozenset[int] = frozenset()) -> None:
    """One in-place update; ``no_decay`` holds indices exempt from decay."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads, and state must align")
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.values.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.values.shape}")
        if cfg.weight_decay and i not in no_decay:
            p.values *= 1.0 - cfg.lr * cfg.weight_decay
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.values -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients jointly so their global L2 norm is <= max_norm."""
    total = float(np.sqrt(sum((g * g).sum() for g in grads)))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total
