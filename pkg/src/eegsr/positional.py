"""Sin-cos absolute positional encodings: 1D temporal and 3D spatial.

The temporal variant encodes integer time-step positions. The spatial
variant encodes each electrode coordinate axis separately with a third of
the embedding width and concatenates the three parts; raw coordinates are
first min-max normalized per axis and then stretched by ``pe_scale`` so the
phases spread over a useful range instead of clustering near position 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .montage import ElectrodeMontage

PE_SCALE_DEFAULT = 100.0


@dataclass(frozen=True)
class PEMatrix:
    values: np.ndarray  # (num_positions, d_model)
    kind: str  # "temporal-1d" | "spatial-3d"


def sincos_encode(pos: float, d_model: int) -> np.ndarray:
    """Interleaved sin/cos features of one scalar position."""
    if d_model < 2 or d_model % 2 != 0:
        raise ShapeError(f"d_model must be even and >= 2, got {d_model}")
    return _encode_positions(np.array([float(pos)]), d_model)[0]


def _encode_positions(positions: np.ndarray, d_model: int) -> np.ndarray:
    i = np.arange(d_model // 2)
    freq = 1.0 / (10000.0 ** (2.0 * i / d_model))
    phase = positions[:, None] * freq[None, :]
    out = np.empty((len(positions), d_model))
    out[:, 0::2] = np.sin(phase)
    out[:, 1::2] = np.cos(phase)
    return out


def temporal_encoding(t_len: int, d_model: int) -> PEMatrix:
    """Rows 0..T-1 of the classic integer-position sin-cos table."""
    if t_len < 1:
        raise ShapeError(f"need at least one position, got {t_len}")
    if d_model < 2 or d_model % 2 != 0:
        raise ShapeError(f"d_model must be even and >= 2, got {d_model}")
    return PEMatrix(_encode_positions(np.arange(t_len, dtype=np.float64), d_model), "temporal-1d")


def normalize_coords(montage: ElectrodeMontage) -> np.ndarray:
    """Affine-map each coordinate axis to [0, 1]; a degenerate axis maps to 0.5."""
    coords = montage.coords
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    out = np.empty_like(coords)
    for ax in range(3):
        if hi[ax] - lo[ax] < 1e-12:
            out[:, ax] = 0.5
        else:
            out[:, ax] = (coords[:, ax] - lo[ax]) / (hi[ax] - lo[ax])
    return out


def spatial_encoding(
    montage: ElectrodeMontage, d_model: int, pe_scale: float = PE_SCALE_DEFAULT
) -> PEMatrix:
    """Concatenated per-axis sin-cos encodings of normalized electrode positions."""
    if d_model % 6 != 0 or d_model < 6:
        raise ShapeError(f"spatial encoding width must be a positive multiple of 6, got {d_model}")
    norm = normalize_coords(montage) * pe_scale
    third = d_model // 3
    parts = [_encode_positions(norm[:, ax], third) for ax in range(3)]
    return PEMatrix(np.concatenate(parts, axis=1), "spatial-3d")
