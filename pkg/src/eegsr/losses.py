"""Training losses and evaluation metrics for masked-channel reconstruction.

The frequency-domain loss sums squared DFT-coefficient differences over the
masked channels, counting conjugate-symmetric bins twice so the total equals
the full-spectrum sum. By Parseval's theorem that makes it exactly T times
the time-domain sum of squares; the identity is asserted in tests rather
than exploited, so the loss stays the literal spectral form.

The two reconstruction losses combine through learned log-variance weights:
total = fmse / (2 sigma1^2) + mae / (2 sigma2^2) + log(sigma1 sigma2) with
sigma_i^2 = exp(s_i), keeping the weights positive and unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tensor as tz
from .errors import ShapeError, UndefinedMetricError
from .tensor import Tensor


@dataclass(frozen=True)
class LossBreakdown:
    fmse: float
    mae: float
    total: float
    sigma1_sq: float
    sigma2_sq: float


@lru_cache(maxsize=16)
def _spectrum_weights(t_len: int) -> np.ndarray:
    """Doubling weights that make half-spectrum sums equal full-spectrum sums."""
    w = np.full(t_len // 2 + 1, 2.0)
    w[0] = 1.0
    if t_len % 2 == 0:
        w[-1] = 1.0
    return w


def freq_mse(x_gt: Tensor, x_sr: Tensor) -> Tensor:
    """Sum over rows of squared spectral differences (full-spectrum count)."""
    if x_gt.shape != x_sr.shape:
        raise ShapeError(f"freq_mse shape mismatch: {x_gt.shape} vs {x_sr.shape}")
    if x_gt.values.ndim == 3:
        n, m, t_len = x_gt.shape
        x_gt = tz.reshape(x_gt, (n * m, t_len))
        x_sr = tz.reshape(x_sr, (n * m, t_len))
    t_len = x_gt.shape[-1]
    diff_spec = tz.rdft(tz.sub(x_gt, x_sr))  # (rows, K, 2); DFT is linear
    w = np.broadcast_to(_spectrum_weights(t_len)[None, :, None], diff_spec.shape)
    return tz.sum_sq(tz.cmul(diff_spec, np.sqrt(w)))


def mae_loss(x_gt: Tensor, x_sr: Tensor) -> Tensor:
    """Sum of absolute differences over the masked channels."""
    if x_gt.shape != x_sr.shape:
        raise ShapeError(f"mae_loss shape mismatch: {x_gt.shape} vs {x_sr.shape}")
    return tz.sum_abs(tz.sub(x_gt, x_sr))


def auto_weighted_loss(fmse: Tensor, mae: Tensor, s1: Tensor, s2: Tensor
                       ) -> tuple[Tensor, LossBreakdown]:
    """Combine the two losses under learned log-variance weights.

    Returns the differentiable total plus a float snapshot of the pieces.
    """
    term1 = tz.scale(tz.mul(fmse, tz.exp(tz.scale(s1, -1.0))), 0.5)
    term2 = tz.scale(tz.mul(mae, tz.exp(tz.scale(s2, -1.0))), 0.5)
    total = tz.add(tz.add(term1, term2), tz.scale(tz.add(s1, s2), 0.5))
    breakdown = LossBreakdown(
        fmse=fmse.item(), mae=mae.item(), total=total.item(),
        sigma1_sq=math.exp(s1.item()), sigma2_sq=math.exp(s2.item()),
    )
    return total, breakdown


# ---------------------------------------------------------------------------
# evaluation metrics (plain numpy; no gradients involved)


def nmse(x_gt: np.ndarray, x_sr: np.ndarray) -> float:
    """Sum of squared errors normalized by ground-truth energy."""
    x_gt, x_sr = np.asarray(x_gt, float), np.asarray(x_sr, float)
    if x_gt.shape != x_sr.shape:
        raise ShapeError(f"nmse shape mismatch: {x_gt.shape} vs {x_sr.shape}")
    energy = (x_gt ** 2).sum()
    if energy == 0.0:
        raise UndefinedMetricError("nmse undefined: ground truth has zero energy")
    return float(((x_gt - x_sr) ** 2).sum() / energy)


def snr_db(x_gt: np.ndarray, x_sr: np.ndarray) -> float:
    """-10 log10(nmse); +inf when the reconstruction is exact."""
    value = nmse(x_gt, x_sr)
    if value == 0.0:
        return math.inf
    return -10.0 * math.log10(value)


def pcc(x_gt: np.ndarray, x_sr: np.ndarray) -> float:
    """Mean over rows of the per-row Pearson correlation coefficient."""
    x_gt, x_sr = np.atleast_2d(np.asarray(x_gt, float)), np.atleast_2d(np.asarray(x_sr, float))
    if x_gt.shape != x_sr.shape:
        raise ShapeError(f"pcc shape mismatch: {x_gt.shape} vs {x_sr.shape}")
    a = x_gt - x_gt.mean(axis=-1, keepdims=True)
    b = x_sr - x_sr.mean(axis=-1, keepdims=True)
    na = np.sqrt((a ** 2).sum(axis=-1))
    nb = np.sqrt((b ** 2).sum(axis=-1))
    if (na == 0).any() or (nb == 0).any():
        raise UndefinedMetricError("pcc undefined: constant row")
    return float(((a * b).sum(axis=-1) / (na * nb)).mean())


def masked_metrics(x_gt_masked: np.ndarray, x_sr_masked: np.ndarray) -> tuple[float, float, float]:
    """(nmse, snr_db, pcc) of one sample's masked-channel block."""
    n = nmse(x_gt_masked, x_sr_masked)
    s = math.inf if n == 0.0 else -10.0 * math.log10(n)
    return n, s, pcc(x_gt_masked, x_sr_masked)
