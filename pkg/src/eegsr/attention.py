"""Multi-head self-attention and its two orientations over EEG latents.

Space-wise attention treats electrode channels as tokens; time-wise
attention transposes first so time samples become the tokens. Both share
one scaled-dot-product core. The module also carries the closed-form FLOPs
estimators used to compare attention against 2D convolution at typical EEG
sizes (these count only the QK/AV products, by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class MSAParams:
    num_heads: int
    wq: Tensor  # (d, d)
    wk: Tensor
    wv: Tensor
    wo: Tensor

    @property
    def d_feature(self) -> int:
        return self.wq.shape[0]

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv", "wo"):
            w = getattr(self, name)
            if w.shape != (d, d):
                raise ShapeError(f"{name} must be ({d}, {d}), got {w.shape}")
        if d % self.num_heads != 0:
            raise ShapeError(f"feature width {d} not divisible by {self.num_heads} heads")


@dataclass(frozen=True)
class FlopsReport:
    op_kind: str  # SSA | TSA | Conv2D
    d_s: int
    d_t: int
    flops: int
    k_s: int = 0
    k_t: int = 0
    c_in: int = 0
    c_out: int = 0

    def csv_row(self) -> str:
        return (f"{self.op_kind},{self.d_s},{self.d_t},{self.k_s},{self.k_t},"
                f"{self.c_in},{self.c_out},{self.flops}")


def msa_forward(p: MSAParams, z: Tensor) -> Tensor:
    """Scaled dot-product attention over rows of z, heads concatenated."""
    d = p.d_feature
    if z.shape[-1] != d:
        raise ShapeError(f"token width {z.shape[-1]} != attention width {d}")
    q = tz.matmul(z, p.wq)
    k = tz.matmul(z, p.wk)
    v = tz.matmul(z, p.wv)
    hw = d // p.num_heads
    inv_sqrt = 1.0 / math.sqrt(hw)
    heads = []
    for h in range(p.num_heads):
        lo, hi = h * hw, (h + 1) * hw
        qh = tz.slice_axis(q, -1, lo, hi)
        kh = tz.slice_axis(k, -1, lo, hi)
        vh = tz.slice_axis(v, -1, lo, hi)
        scores = tz.scale(tz.matmul(qh, tz.transpose2d(kh)), inv_sqrt)
        heads.append(tz.matmul(tz.softmax_rows(scores), vh))
    mixed = heads[0]
    for extra in heads[1:]:
        mixed = tz.concat(mixed, extra, axis=-1)
    return tz.matmul(mixed, p.wo)


def space_attention(p: MSAParams, z: Tensor) -> Tensor:
    """Attention with channels as tokens: z is (channels, time_features)."""
    return msa_forward(p, z)


def time_attention(p: MSAParams, z: Tensor) -> Tensor:
    """Attention with time samples as tokens: transpose, attend, transpose back."""
    return tz.transpose2d(msa_forward(p, tz.transpose2d(z)))


def _check_positive(**kwargs) -> None:
    for name, v in kwargs.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")


def flops_space_attention(d_s: int, d_t: int) -> int:
    _check_positive(d_s=d_s, d_t=d_t)
    return 4 * d_s * d_t ** 2 + 2 * d_s ** 2 * d_t


def flops_time_attention(d_s: int, d_t: int) -> int:
    _check_positive(d_s=d_s, d_t=d_t)
    return 4 * d_t * d_s ** 2 + 2 * d_t ** 2 * d_s


def flops_conv2d(c_in: int, c_out: int, k_s: int, k_t: int, d_s: int, d_t: int) -> int:
    _check_positive(c_in=c_in, c_out=c_out, k_s=k_s, k_t=k_t, d_s=d_s, d_t=d_t)
    return c_in * c_out * k_s * k_t * d_s * d_t


def flops_reports(d_s: int, d_t: int, c_in: int = 128, c_out: int = 128,
                  k_s: int = 33, k_t: int = 1) -> list[FlopsReport]:
    return [
        FlopsReport("SSA", d_s, d_t, flops_space_attention(d_s, d_t)),
        FlopsReport("TSA", d_s, d_t, flops_time_attention(d_s, d_t)),
        FlopsReport("Conv2D", d_s, d_t, flops_conv2d(c_in, c_out, k_s, k_t, d_s, d_t),
                    k_s=k_s, k_t=k_t, c_in=c_in, c_out=c_out),
    ]
