"""Dataset container, synthetic EEG generation, and train/test splitting.

Synthetic recordings mix a handful of dipole-like sources into the montage
channels. Each source emits one sinusoid per canonical frequency band with
a class-dependent amplitude profile; channel gains decay exponentially with
great-circle distance from the source, which makes nearby electrodes
strongly correlated (the structure interpolation methods rely on). A
pink-ish noise floor is added per channel and the whole dataset is scaled
to per-channel unit std.

The on-disk container is little-endian and trivially parseable:
magic `ESR1`, u32 version=1, u32 N, u32 C, u32 T, f32 sample_rate,
u8 has_labels; then C electrode records (16-byte zero-padded name,
f32 x, y, z); then N*C*T f32 sample values window-major; then N u16 labels
when has_labels is 1. The same file is the ingestion format for real
recordings: write windows of any preprocessed dataset into it and every
tool here applies unchanged.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    TruncatedFileError,
    VersionMismatchError,
)
from .montage import ElectrodeMontage

BANDS: dict[str, tuple[float, float]] = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 50.0),
}
BAND_NAMES = tuple(BANDS)

_MAGIC = b"ESR1"
_VERSION = 1


@dataclass
class EEGDataset:
    montage: ElectrodeMontage
    sample_rate: float
    windows: np.ndarray            # (N, C, T) float64
    labels: np.ndarray | None      # (N,) int, optional
    window_seconds: float

    def __post_init__(self):
        n, c, t = self.windows.shape
        if c != len(self.montage):
            raise ConfigError(f"windows have {c} channels, montage has {len(self.montage)}")
        if round(self.sample_rate * self.window_seconds) != t:
            raise ConfigError(
                f"T={t} inconsistent with {self.sample_rate} Hz x {self.window_seconds} s")
        if self.labels is not None and len(self.labels) != n:
            raise ConfigError("labels length must match window count")

    def __len__(self) -> int:
        return len(self.windows)

    def subset(self, indices) -> "EEGDataset":
        idx = np.asarray(indices, dtype=np.intp)
        labels = None if self.labels is None else self.labels[idx]
        return EEGDataset(self.montage, self.sample_rate, self.windows[idx],
                          labels, self.window_seconds)

    def with_windows(self, windows: np.ndarray) -> "EEGDataset":
        return EEGDataset(self.montage, self.sample_rate, windows,
                          self.labels, self.window_seconds)


@dataclass(frozen=True)
class SyntheticConfig:
    n_sources: int = 8
    band_mix: dict[str, tuple[float, float]] = field(default_factory=lambda: {
        "delta": (0.6, 1.2), "theta": (0.5, 1.0), "alpha": (0.8, 1.6),
        "beta": (0.4, 0.9), "gamma": (0.2, 0.6),
    })
    noise_std: float = 0.1
    n_classes: int = 0             # 0 -> unlabeled dataset
    class_perturb: float = 0.4     # log-scale per-class amplitude jitter
    mixing_kappa: float = 3.0      # channel gain = exp(-kappa * distance)
    seed: int = 0

    def validate(self) -> None:
        if self.n_sources < 1:
            raise ConfigError("need at least one source")
        if set(self.band_mix) != set(BAND_NAMES):
            raise ConfigError(f"band_mix must cover exactly {BAND_NAMES}")
        for name, (lo, hi) in self.band_mix.items():
            if lo < 0 or hi < lo:
                raise ConfigError(f"bad amplitude range for {name}: ({lo}, {hi})")
        if self.noise_std < 0 or self.class_perturb < 0 or self.mixing_kappa <= 0:
            raise ConfigError("noise/perturbation/kappa out of range")
        if self.n_classes < 0:
            raise ConfigError("n_classes must be >= 0")


def _pink_noise(rng: np.random.Generator, t_len: int) -> np.ndarray:
    """Unit-std noise with a 1/sqrt(f) amplitude roll-off."""
    white = rng.standard_normal(t_len)
    spec = np.fft.rfft(white)
    k = np.arange(len(spec), dtype=float)
    k[0] = 1.0
    shaped = np.fft.irfft(spec / np.sqrt(k), n=t_len)
    std = shaped.std()
    return shaped / std if std > 0 else shaped


def synth_generate(cfg: SyntheticConfig, montage: ElectrodeMontage, sample_rate: float,
                   window_seconds: float, n_windows: int) -> EEGDataset:
    """Deterministic synthetic dataset for a montage; same seed, same bytes."""
    cfg.validate()
    if sample_rate < 2 * BANDS["gamma"][1]:
        raise ConfigError(f"sample rate {sample_rate} Hz cannot represent the gamma band")
    t_len = round(sample_rate * window_seconds)
    if t_len < 2 or n_windows < 1:
        raise ConfigError("need at least one window of at least two samples")
    rng = np.random.default_rng(cfg.seed)
    c = len(montage)

    # source geometry and mixing gains
    raw = rng.standard_normal((cfg.n_sources, 3))
    sources = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    cosang = np.clip(montage.coords @ sources.T, -1.0, 1.0)
    gains = np.exp(-cfg.mixing_kappa * np.arccos(cosang))  # (C, S)

    # per-source base band amplitudes, then per-class log-normal jitter
    base = np.stack([
        rng.uniform(*cfg.band_mix[name], size=cfg.n_sources) for name in BAND_NAMES
    ], axis=1)  # (S, B)
    n_classes = max(cfg.n_classes, 1)
    class_amp = base[None] * np.exp(
        cfg.class_perturb * rng.standard_normal((n_classes, cfg.n_sources, len(BAND_NAMES))))

    labels = rng.integers(0, n_classes, size=n_windows) if cfg.n_classes >= 2 else None
    t_axis = np.arange(t_len) / sample_rate
    windows = np.empty((n_windows, c, t_len))
    band_edges = [BANDS[name] for name in BAND_NAMES]

    for w in range(n_windows):
        cls = int(labels[w]) if labels is not None else 0
        source_sig = np.zeros((cfg.n_sources, t_len))
        for s in range(cfg.n_sources):
            for b, (lo, hi) in enumerate(band_edges):
                freq = rng.uniform(lo, hi)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                source_sig[s] += class_amp[cls, s, b] * np.sin(2 * np.pi * freq * t_axis + phase)
        mixed = gains @ source_sig
        if cfg.noise_std > 0:
            noise = np.stack([_pink_noise(rng, t_len) for _ in range(c)])
            mixed = mixed + cfg.noise_std * noise
        windows[w] = mixed

    # one global scale per channel keeps within-window structure linear
    stds = windows.std(axis=(0, 2), keepdims=True)
    stds[stds == 0] = 1.0
    windows /= stds

    return EEGDataset(montage, float(sample_rate), windows, labels, float(window_seconds))


def split(ds: EEGDataset, train_frac: float = 0.8, seed: int = 0
          ) -> tuple[EEGDataset, EEGDataset]:
    """Seeded shuffle, then a disjoint exhaustive head/tail split."""
    n = len(ds)
    if n < 2:
        raise ConfigError(f"cannot split a dataset of {n} windows")
    if not 0 < train_frac < 1:
        raise ConfigError(f"train_frac must be in (0, 1), got {train_frac}")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(train_frac * n)
    cut = min(max(cut, 1), n - 1)
    return ds.subset(order[:cut]), ds.subset(order[cut:])


# ---------------------------------------------------------------------------
# container I/O


def save(ds: EEGDataset, path) -> None:
    has_labels = ds.labels is not None
    n, c, t_len = ds.windows.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIIIfB", _VERSION, n, c, t_len,
                            float(ds.sample_rate), int(has_labels)))
        for name, (x, y, z) in zip(ds.montage.names, ds.montage.coords):
            raw = name.encode()
            if len(raw) > 16:
                raise ConfigError(f"electrode name {name!r} exceeds 16 bytes")
            f.write(raw.ljust(16, b"\x00"))
            f.write(struct.pack("<fff", x, y, z))
        f.write(ds.windows.astype("<f4").tobytes())
        if has_labels:
            f.write(ds.labels.astype("<u2").tobytes())


def load(path) -> EEGDataset:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != _MAGIC:
        raise BadMagicError(f"{path}: not a dataset container (bad magic)")
    header_size = 4 + struct.calcsize("<IIIIfB")
    if len(data) < header_size:
        raise TruncatedFileError(f"{path}: header truncated")
    version, n, c, t_len, sample_rate, has_labels = struct.unpack(
        "<IIIIfB", data[4:header_size])
    if version != _VERSION:
        raise VersionMismatchError(f"{path}: container version {version}, expected {_VERSION}")

    offset = header_size
    names, coords = [], []
    record = struct.Struct("<fff")
    for _ in range(c):
        if len(data) < offset + 16 + 12:
            raise TruncatedFileError(f"{path}: electrode table truncated")
        names.append(data[offset:offset + 16].rstrip(b"\x00").decode())
        coords.append(record.unpack(data[offset + 16:offset + 28]))
        offset += 28

    count = n * c * t_len
    if len(data) < offset + 4 * count:
        raise TruncatedFileError(f"{path}: sample payload truncated")
    windows = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    windows = windows.astype(np.float64).reshape(n, c, t_len)
    offset += 4 * count

    labels = None
    if has_labels:
        if len(data) < offset + 2 * n:
            raise TruncatedFileError(f"{path}: label block truncated")
        labels = np.frombuffer(data, dtype="<u2", count=n, offset=offset).astype(np.int64)

    montage = ElectrodeMontage(tuple(names), np.array(coords, dtype=np.float64))
    window_seconds = t_len / sample_rate
    return EEGDataset(montage, float(sample_rate), windows, labels, float(window_seconds))
