"""Visible/masked channel partitions defining each super-resolution problem.

A MaskSpec fixes which electrodes of a montage are measured (visible) and
which must be reconstructed (masked). Four deterministic case constructions
are provided per scale factor: case 1 keeps every k-th electrode in
canonical order; cases 2-4 are greedy max-min-distance selections seeded
1-3, giving spatially spread subsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .montage import ElectrodeMontage

SCALE_FACTORS = (2, 4, 8)
NUM_CASES = 4


@dataclass(frozen=True)
class MaskSpec:
    montage: ElectrodeMontage
    visible_idx: tuple[int, ...]
    masked_idx: tuple[int, ...]
    scale_factor: int

    def __post_init__(self):
        c = len(self.montage)
        combined = sorted(self.visible_idx) + sorted(self.masked_idx)
        if sorted(combined) != list(range(c)):
            raise ConfigError("visible and masked indices must partition 0..C-1")
        if not self.visible_idx or not self.masked_idx:
            raise ConfigError("need at least one visible and one masked channel")

    @property
    def c_sr(self) -> int:
        return len(self.montage)

    @property
    def c_lr(self) -> int:
        return len(self.visible_idx)

    @property
    def c_mask(self) -> int:
        return len(self.masked_idx)

    def split_rows(self, full: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(visible rows, masked rows) of an array whose axis -2 is channels."""
        return full[..., list(self.visible_idx), :], full[..., list(self.masked_idx), :]


def _every_kth(c: int, c_lr: int, k: int) -> list[int]:
    picked = list(range(0, c, k))
    # keep exactly c_lr channels when C is not divisible by the scale
    return picked[:c_lr]


def _greedy_spread(montage: ElectrodeMontage, c_lr: int, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    dist = montage.great_circle_distances()
    chosen = [int(rng.integers(0, len(montage)))]
    while len(chosen) < c_lr:
        min_d = dist[:, chosen].min(axis=1)
        min_d[chosen] = -np.inf
        # ties resolve to the lowest canonical index via argmax
        chosen.append(int(np.argmax(min_d)))
    return sorted(chosen)


def make_mask_spec(montage: ElectrodeMontage, visible: list[int], scale_factor: int) -> MaskSpec:
    visible_sorted = tuple(sorted(visible))
    masked = tuple(i for i in range(len(montage)) if i not in set(visible_sorted))
    return MaskSpec(montage, visible_sorted, masked, scale_factor)


def mask_cases(montage: ElectrodeMontage, scale_factor: int) -> list[MaskSpec]:
    """The four deterministic visible-set selections for one scale factor."""
    if scale_factor not in SCALE_FACTORS:
        raise ConfigError(f"scale factor must be one of {SCALE_FACTORS}, got {scale_factor}")
    c = len(montage)
    c_lr = round(c / scale_factor)
    if c_lr < 2 or c_lr >= c:
        raise ConfigError(f"montage with {c} channels too small for scale {scale_factor}")
    specs = [make_mask_spec(montage, _every_kth(c, c_lr, scale_factor), scale_factor)]
    for seed in (1, 2, 3):
        specs.append(make_mask_spec(montage, _greedy_spread(montage, c_lr, seed), scale_factor))
    return specs


def min_pairwise_distance(montage: ElectrodeMontage, indices) -> float:
    """Smallest great-circle distance among the chosen electrodes, radians."""
    idx = list(indices)
    d = montage.great_circle_distances()[np.ix_(idx, idx)]
    np.fill_diagonal(d, np.inf)
    return float(d.min())
