#!/usr/bin/env python3
"""Regenerate the bundled montage asset files.

Coordinates are idealized extended 10-20 positions on a unit sphere:
the scalp circumference ring sits at 72 degrees from the vertex, midline
electrodes at their standard sagittal angles, and interior electrodes are
placed by great-circle interpolation between the ring electrode and the
midline electrode of their row. Axes: +x right ear, +y nasion, +z vertex.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eegsr.montage import ElectrodeMontage, save_montage  # noqa: E402

RING_POLAR = 72.0


def direction(polar_deg: float, az_deg: float) -> np.ndarray:
    """Unit vector at polar angle from +z, azimuth in the xy plane from +x."""
    th, ph = np.radians(polar_deg), np.radians(az_deg)
    return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def ring(circ_deg: float) -> np.ndarray:
    """Point on the circumference ring; circ_deg runs from the nasion leftward."""
    return direction(RING_POLAR, 90.0 + circ_deg)


def slerp(u: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    omega = np.arccos(np.clip(np.dot(u, v), -1.0, 1.0))
    if omega < 1e-12:
        return u.copy()
    return (np.sin((1 - t) * omega) * u + np.sin(t * omega) * v) / np.sin(omega)


def build_positions() -> dict[str, np.ndarray]:
    pos: dict[str, np.ndarray] = {}

    # circumference ring, every 18 degrees
    ring_left = ["FPZ", "FP1", "AF7", "F7", "FT7", "T7", "TP7", "P7", "PO7", "O1", "OZ"]
    for i, name in enumerate(ring_left):
        pos[name] = ring(18.0 * i)
    ring_right = ["FP2", "AF8", "F8", "FT8", "T8", "TP8", "P8", "PO8", "O2"]
    for i, name in enumerate(ring_right, start=1):
        pos[name] = ring(-18.0 * i)

    # sagittal midline
    for name, polar, front in [
        ("AFZ", 54, True), ("FZ", 36, True), ("FCZ", 18, True), ("CZ", 0, True),
        ("CPZ", 18, False), ("PZ", 36, False), ("POZ", 54, False),
    ]:
        pos[name] = direction(polar, 90.0 if front else 270.0)

    # below-ring positions on the equator
    pos["T9"] = direction(90, 180)
    pos["T10"] = direction(90, 0)
    pos["IZ"] = direction(90, 270)
    pos["CB1"] = direction(90, 90 + 162)
    pos["CB2"] = direction(90, 90 - 162)

    # transverse rows: interpolate ring -> midline; columns 5/3/1 sit at
    # 1/4, 1/2, 3/4 of the arc, matching the 10-10 20%/30%/40% marks
    rows = {
        "AF": ("AF7", "AF8", "AFZ"),
        "F": ("F7", "F8", "FZ"),
        "FC": ("FT7", "FT8", "FCZ"),
        "C": ("T7", "T8", "CZ"),
        "CP": ("TP7", "TP8", "CPZ"),
        "P": ("P7", "P8", "PZ"),
        "PO": ("PO7", "PO8", "POZ"),
    }
    for row, (left, right, mid) in rows.items():
        for col in (5, 3, 1):
            t = (7 - col) / 8.0
            pos[f"{row}{col}"] = slerp(pos[left], pos[mid], t)
            pos[f"{row}{col + 1}"] = slerp(pos[right], pos[mid], t)
    return pos


MI64 = [
    "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6",
    "C5", "C3", "C1", "CZ", "C2", "C4", "C6",
    "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6",
    "FP1", "FPZ", "FP2",
    "AF7", "AF3", "AFZ", "AF4", "AF8",
    "F7", "F5", "F3", "F1", "FZ", "F2", "F4", "F6", "F8",
    "FT7", "FT8", "T7", "T8", "T9", "T10", "TP7", "TP8",
    "P7", "P5", "P3", "P1", "PZ", "P2", "P4", "P6", "P8",
    "PO7", "PO3", "POZ", "PO4", "PO8",
    "O1", "OZ", "O2", "IZ",
]

SEED62 = [
    "FP1", "FPZ", "FP2", "AF3", "AF4",
    "F7", "F5", "F3", "F1", "FZ", "F2", "F4", "F6", "F8",
    "FT7", "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6", "FT8",
    "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8",
    "TP7", "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8",
    "P7", "P5", "P3", "P1", "PZ", "P2", "P4", "P6", "P8",
    "PO7", "PO5", "PO3", "POZ", "PO4", "PO6", "PO8",
    "CB1", "O1", "OZ", "O2", "CB2",
]


def main():
    pos = build_positions()
    assets = Path(__file__).resolve().parents[1] / "src" / "eegsr" / "assets"
    assets.mkdir(parents=True, exist_ok=True)
    for fname, names in [("montage_mi64.txt", MI64), ("montage_seed62.txt", SEED62)]:
        coords = np.array([pos[n] for n in names])
        m = ElectrodeMontage(tuple(names), coords)
        save_montage(m, assets / fname)
        pair = m.great_circle_distances()
        np.fill_diagonal(pair, np.inf)
        print(f"{fname}: {len(m)} electrodes, min pair distance "
              f"{np.degrees(pair.min()):.2f} deg")


if __name__ == "__main__":
    main()
