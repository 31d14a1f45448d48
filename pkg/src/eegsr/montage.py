"""Electrode montages: named electrodes with unit-sphere 3D coordinates.

The electrode ordering is the canonical channel order for every data array
in the package. Two standard layouts are bundled as text files under
``assets/``: a 64-channel and a 62-channel extended 10-20 arrangement with
idealized spherical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError

_NORM_TOL = 1e-6


@dataclass(frozen=True)
class ElectrodeMontage:
    names: tuple[str, ...]
    coords: np.ndarray  # (C, 3) float64, unit sphere

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.shape != (len(self.names), 3):
            raise ConfigError(f"montage needs (C, 3) coordinates, got {coords.shape}")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("montage electrode names must be unique")
        norms = np.linalg.norm(coords, axis=1)
        if not np.allclose(norms, 1.0, atol=_NORM_TOL):
            worst = self.names[int(np.argmax(np.abs(norms - 1.0)))]
            raise ConfigError(f"electrode {worst} is not on the unit sphere")
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown electrode {name!r}") from None

    def great_circle_distances(self) -> np.ndarray:
        """(C, C) matrix of angular distances in radians."""
        cosang = np.clip(self.coords @ self.coords.T, -1.0, 1.0)
        return np.arccos(cosang)

    def subset(self, indices) -> "ElectrodeMontage":
        idx = list(indices)
        return ElectrodeMontage(
            tuple(self.names[i] for i in idx), self.coords[idx].copy()
        )


def load_montage(path) -> ElectrodeMontage:
    """Read a montage text file: one `NAME x y z` line per electrode, `#` comments."""
    names: list[str] = []
    rows: list[list[float]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ConfigError(f"{path}:{lineno}: expected `NAME x y z`, got {raw!r}")
        names.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad coordinate in {raw!r}") from e
    if not names:
        raise ConfigError(f"{path}: montage file holds no electrodes")
    return ElectrodeMontage(tuple(names), np.array(rows))


def save_montage(montage: ElectrodeMontage, path) -> None:
    lines = [
        f"{name} {x:.10f} {y:.10f} {z:.10f}"
        for name, (x, y, z) in zip(montage.names, montage.coords)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def bundled_montage(name: str) -> ElectrodeMontage:
    """Load a shipped montage by short name: `mi64` or `seed62`."""
    fname = {"mi64": "montage_mi64.txt", "seed62": "montage_seed62.txt"}.get(name)
    if fname is None:
        raise ConfigError(f"no bundled montage named {name!r} (try mi64 or seed62)")
    ref = resources.files("eegsr").joinpath("assets", fname)
    with resources.as_file(ref) as p:
        return load_montage(p)


def spread_subset(montage: ElectrodeMontage, k: int, start: int = 0) -> ElectrodeMontage:
    """Pick k spatially spread electrodes by greedy max-min angular distance."""
    if not 1 <= k <= len(montage):
        raise ConfigError(f"cannot pick {k} electrodes from {len(montage)}")
    dist = montage.great_circle_distances()
    chosen = [start]
    while len(chosen) < k:
        min_d = dist[:, chosen].min(axis=1)
        min_d[chosen] = -1.0
        chosen.append(int(np.argmax(min_d)))
    return montage.subset(sorted(chosen))
