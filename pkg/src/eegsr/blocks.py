"""Pre-norm residual transformer blocks over space or time tokens.

All blocks share one pipeline: tokens + Attn(LN(tokens)), then
tokens + MLP(LN(tokens)). The space block applies it with channels as the
token rows; the time block runs the same pipeline on the transposed matrix.
A dual block chains time block then space block and adds an outer skip, so
the temporal pass acts as an auxiliary stage for the spatial one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .attention import MSAParams, msa_forward
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class MLPParams:
    w1: Tensor  # (d, ratio*d)
    b1: Tensor
    w2: Tensor  # (ratio*d, d)
    b2: Tensor
    dropout: float = 0.0

    def __post_init__(self):
        d, hidden = self.w1.shape
        if hidden % d != 0:
            raise ShapeError(f"hidden width {hidden} is not a multiple of input width {d}")
        if self.w2.shape != (hidden, d):
            raise ShapeError(f"w2 must be ({hidden}, {d}), got {self.w2.shape}")


@dataclass
class BlockParams:
    """One pre-norm attention block: LN -> MSA -> skip, LN -> MLP -> skip."""

    ln1_gain: Tensor
    ln1_bias: Tensor
    msa: MSAParams
    ln2_gain: Tensor
    ln2_bias: Tensor
    mlp: MLPParams


@dataclass
class DualBlockParams:
    """Time block feeding a space block, with an outer input skip."""

    time_block: BlockParams
    space_block: BlockParams


def mlp_forward(p: MLPParams, z: Tensor, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    h = tz.gelu(tz.linear(z, p.w1, p.b1))
    h = tz.dropout(h, p.dropout, rng, training)
    return tz.linear(h, p.w2, p.b2)


def attention_block_forward(p: BlockParams, tokens: Tensor, *, eps: float = 1e-5,
                            training: bool = False,
                            rng: np.random.Generator | None = None) -> Tensor:
    """The shared pipeline over row tokens of shape (..., n_tokens, d)."""
    attended = msa_forward(p.msa, tz.layer_norm(tokens, p.ln1_gain, p.ln1_bias, eps))
    mid = tz.add(tokens, attended)
    mixed = mlp_forward(p.mlp, tz.layer_norm(mid, p.ln2_gain, p.ln2_bias, eps), training, rng)
    return tz.add(mid, mixed)


def space_block_forward(p: BlockParams, z: Tensor, *, eps: float = 1e-5,
                        training: bool = False,
                        rng: np.random.Generator | None = None) -> Tensor:
    """Channels are tokens: z is (..., d_s, d_t) and attention mixes rows."""
    return attention_block_forward(p, z, eps=eps, training=training, rng=rng)


def time_block_forward(p: BlockParams, z: Tensor, *, eps: float = 1e-5,
                       training: bool = False,
                       rng: np.random.Generator | None = None) -> Tensor:
    """Time samples are tokens: the pipeline runs on the transposed matrix."""
    zt = tz.transpose2d(z)
    out = attention_block_forward(p, zt, eps=eps, training=training, rng=rng)
    return tz.transpose2d(out)


def dual_block_forward(p: DualBlockParams, z: Tensor, *, eps: float = 1e-5,
                       training: bool = False,
                       rng: np.random.Generator | None = None,
                       outer_residual: bool = True) -> Tensor:
    h = time_block_forward(p.time_block, z, eps=eps, training=training, rng=rng)
    h = space_block_forward(p.space_block, h, eps=eps, training=training, rng=rng)
    return tz.add(h, z) if outer_residual else h
