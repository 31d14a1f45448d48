"""Training-free interpolation baselines on the electrode sphere.

``si_interpolate`` fits a spherical spline: a constant plus a weighted sum
of Legendre-series kernels centered at the visible electrodes, with the
weights constrained to sum to zero. One factorization of the fit system is
reused across all time samples of a window, so a whole window solves in a
single call.

``an_interpolate`` is the simplest alternative: each masked channel is the
unweighted mean of its k nearest visible electrodes by great-circle
distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .masks import MaskSpec


@dataclass(frozen=True)
class SplineConfig:
    m: int = 4           # smoothness order
    n_terms: int = 7     # Legendre series length
    lam: float = 0.0     # ridge term on the kernel matrix diagonal

    def validate(self) -> None:
        if self.m < 2 or self.n_terms < 1 or self.lam < 0:
            raise ConfigError(f"invalid spline config: m={self.m}, n_terms={self.n_terms}, lam={self.lam}")


def legendre_eval(n: int, x) -> np.ndarray | float:
    """P_n(x) on [-1, 1] via the three-term recurrence."""
    if n < 0:
        raise ValueError(f"Legendre order must be >= 0, got {n}")
    xv = np.asarray(x, dtype=np.float64)
    if (np.abs(xv) > 1.0 + 1e-12).any():
        raise ValueError("Legendre argument outside [-1, 1]")
    p_prev = np.ones_like(xv)
    if n == 0:
        return p_prev if xv.ndim else float(p_prev)
    p_curr = xv.copy()
    for k in range(1, n):
        p_next = ((2 * k + 1) * xv * p_curr - k * p_prev) / (k + 1)
        p_prev, p_curr = p_curr, p_next
    return p_curr if xv.ndim else float(p_curr)


def spline_kernel(cos_theta, cfg: SplineConfig = SplineConfig()) -> np.ndarray | float:
    """g(x) = (1/4pi) sum_{n=1..N} (2n+1) / (n (n+1))^m * P_n(x)."""
    cfg.validate()
    xv = np.asarray(cos_theta, dtype=np.float64)
    if (np.abs(xv) > 1.0 + 1e-12).any():
        raise ValueError("kernel argument outside [-1, 1]")
    total = np.zeros_like(xv)
    for n in range(1, cfg.n_terms + 1):
        coeff = (2 * n + 1) / (n * (n + 1)) ** cfg.m
        total = total + coeff * legendre_eval(n, xv)
    total = total / (4.0 * np.pi)
    return total if xv.ndim else float(total)


def _fit_matrix(spec: MaskSpec, cfg: SplineConfig) -> tuple[np.ndarray, np.ndarray]:
    coords = spec.montage.coords
    vis = list(spec.visible_idx)
    mas = list(spec.masked_idx)
    cos_vv = np.clip(coords[vis] @ coords[vis].T, -1.0, 1.0)
    cos_mv = np.clip(coords[mas] @ coords[vis].T, -1.0, 1.0)
    g_vv = spline_kernel(cos_vv, cfg) + cfg.lam * np.eye(len(vis))
    g_mv = spline_kernel(cos_mv, cfg)
    n = len(vis)
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = g_vv
    system[:n, n] = 1.0
    system[n, :n] = 1.0
    return system, g_mv


def si_interpolate(x_lr: np.ndarray, spec: MaskSpec,
                   cfg: SplineConfig = SplineConfig()) -> np.ndarray:
    """Spherical-spline prediction of the masked channels, (C_Mask, T)."""
    cfg.validate()
    x_lr = np.asarray(x_lr, dtype=np.float64)
    if x_lr.shape[0] != spec.c_lr:
        raise ShapeError(f"expected {spec.c_lr} visible rows, got {x_lr.shape}")
    system, g_mv = _fit_matrix(spec, cfg)
    n, t_len = spec.c_lr, x_lr.shape[1]
    rhs = np.zeros((n + 1, t_len))
    rhs[:n] = x_lr
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericError(f"spline system is near singular (cond ~ {cond:.2e}); "
                           "check for coincident or collinear electrodes")
    solution = np.linalg.solve(system, rhs)
    coeffs, intercept = solution[:n], solution[n]
    return g_mv @ coeffs + intercept


def si_predict_full(x_lr: np.ndarray, spec: MaskSpec,
                    cfg: SplineConfig = SplineConfig()) -> np.ndarray:
    """Full (C_SR, T) reconstruction with visible rows copied through."""
    out = np.empty((spec.c_sr, x_lr.shape[1]))
    out[list(spec.visible_idx)] = x_lr
    out[list(spec.masked_idx)] = si_interpolate(x_lr, spec, cfg)
    return out


def nearest_visible(spec: MaskSpec, k: int) -> np.ndarray:
    """(C_Mask, k) indices into the visible rows; ties break by canonical index."""
    if not 1 <= k <= spec.c_lr:
        raise ConfigError(f"k must be in [1, {spec.c_lr}], got {k}")
    coords = spec.montage.coords
    vis = list(spec.visible_idx)
    mas = list(spec.masked_idx)
    dist = np.arccos(np.clip(coords[mas] @ coords[vis].T, -1.0, 1.0))
    # lexsort on (canonical index, distance): stable tie-break by index
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def an_interpolate(x_lr: np.ndarray, spec: MaskSpec, k: int = 4) -> np.ndarray:
    """Each masked channel = mean of its k nearest visible channels."""
    x_lr = np.asarray(x_lr, dtype=np.float64)
    if x_lr.shape[0] != spec.c_lr:
        raise ShapeError(f"expected {spec.c_lr} visible rows, got {x_lr.shape}")
    neighbors = nearest_visible(spec, k)
    return x_lr[neighbors].mean(axis=1)


def an_predict_full(x_lr: np.ndarray, spec: MaskSpec, k: int = 4) -> np.ndarray:
    out = np.empty((spec.c_sr, x_lr.shape[1]))
    out[list(spec.visible_idx)] = x_lr
    out[list(spec.masked_idx)] = an_interpolate(x_lr, spec, k)
    return out


def baseline_predictor(kind: str, spec: MaskSpec, cfg: SplineConfig = SplineConfig(),
                       k: int = 4):
    """Batch predictor (N, C_LR, T) -> (N, C_SR, T) for `si` or `an`."""
    if kind == "si":
        fn = lambda w: si_predict_full(w, spec, cfg)
    elif kind == "an":
        fn = lambda w: an_predict_full(w, spec, k)
    else:
        raise ConfigError(f"unknown baseline {kind!r} (expected si or an)")

    def predict(x_lr: np.ndarray) -> np.ndarray:
        return np.stack([fn(w) for w in np.asarray(x_lr, dtype=np.float64)])

    return predict
