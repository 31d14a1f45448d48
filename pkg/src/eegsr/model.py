"""The channel super-resolution model: spatial interpolation then temporal
refinement, with the measured channels passed through untouched.

Stage 1 (spatial): embed each visible channel's waveform, add the 3D
positional encoding, run an encoder stack of dual attention blocks, splice
a learned mask token into every missing channel slot, add the positional
encoding again, decode with a second dual-block stack, and project the
masked-slot tokens back to waveforms.

Stage 2 (temporal): merge predicted and measured channels, embed each time
sample's channel vector, add the 1D positional encoding before each of two
time-block stacks, and project back to channel space.

The final output copies the measured rows from the input bit-exactly; only
masked rows come from the network.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .attention import MSAParams
from .blocks import (
    BlockParams,
    DualBlockParams,
    MLPParams,
    attention_block_forward,
    dual_block_forward,
)
from .errors import ConfigError, ShapeError
from .masks import MaskSpec
from .positional import spatial_encoding, temporal_encoding
from .tensor import Tensor, param

SPACE_HEADS = 3
TIME_HEADS = 1


@dataclass(frozen=True)
class Hyperparams:
    """Architecture knobs; defaults follow the reference configuration."""

    alpha_space: float = 0.60   # spatial embed width fraction of T
    alpha_time: float = 0.75    # temporal embed width fraction of C
    mlp_ratio: int = 4
    depth_space: int = 1        # dual blocks per encoder/decoder stack
    depth_time: int = 1         # time blocks per refinement stack
    dropout: float = 0.5
    ln_eps: float = 1e-5
    pe_scale: float = 100.0
    outer_residual: bool = True

    def validate(self) -> None:
        if not (0 < self.alpha_space and 0 < self.alpha_time):
            raise ConfigError("embed width fractions must be positive")
        if self.mlp_ratio < 1 or self.depth_space < 1 or self.depth_time < 1:
            raise ConfigError("depths and mlp ratio must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.ln_eps <= 0 or self.pe_scale <= 0:
            raise ConfigError("ln_eps and pe_scale must be positive")


def spatial_width(t_len: int, alpha_space: float) -> int:
    """round(alpha * T), rounded up to a multiple of 6 for the 3-axis encoding."""
    d = max(6, round(alpha_space * t_len))
    return d + (-d) % 6


def temporal_width(c_sr: int, alpha_time: float) -> int:
    """round(alpha * C), rounded up to even for sin/cos pairing."""
    d = max(2, round(alpha_time * c_sr))
    return d + d % 2


@dataclass
class SpatialStageParams:
    embed_w: Tensor          # (T, D)
    embed_b: Tensor
    mask_token: Tensor       # (1, D)
    encoder: list[DualBlockParams]
    decoder: list[DualBlockParams]
    out_w: Tensor            # (D, T)
    out_b: Tensor
    pe3d: Tensor             # (C_SR, D) constant


@dataclass
class TemporalStageParams:
    embed_w: Tensor          # (C_SR, D)
    embed_b: Tensor
    stage1: list[BlockParams]
    stage2: list[BlockParams]
    out_w: Tensor            # (D, C_SR)
    out_b: Tensor
    pe1d: Tensor             # (T, D) constant


@dataclass
class ModelParams:
    spatial: SpatialStageParams
    temporal: TemporalStageParams
    loss_log_var1: Tensor    # s1; sigma1^2 = exp(s1)
    loss_log_var2: Tensor
    hp: Hyperparams
    c_sr: int
    c_lr: int
    t_len: int

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Learnable tensors in declaration order."""
        out: list[tuple[str, Tensor]] = []

        def block(prefix, b: BlockParams):
            out.extend([
                (f"{prefix}.ln1_gain", b.ln1_gain), (f"{prefix}.ln1_bias", b.ln1_bias),
                (f"{prefix}.msa.wq", b.msa.wq), (f"{prefix}.msa.wk", b.msa.wk),
                (f"{prefix}.msa.wv", b.msa.wv), (f"{prefix}.msa.wo", b.msa.wo),
                (f"{prefix}.ln2_gain", b.ln2_gain), (f"{prefix}.ln2_bias", b.ln2_bias),
                (f"{prefix}.mlp.w1", b.mlp.w1), (f"{prefix}.mlp.b1", b.mlp.b1),
                (f"{prefix}.mlp.w2", b.mlp.w2), (f"{prefix}.mlp.b2", b.mlp.b2),
            ])

        sp = self.spatial
        out.extend([("spatial.embed_w", sp.embed_w), ("spatial.embed_b", sp.embed_b),
                    ("spatial.mask_token", sp.mask_token)])
        for i, dual in enumerate(sp.encoder):
            block(f"spatial.encoder.{i}.time", dual.time_block)
            block(f"spatial.encoder.{i}.space", dual.space_block)
        for i, dual in enumerate(sp.decoder):
            block(f"spatial.decoder.{i}.time", dual.time_block)
            block(f"spatial.decoder.{i}.space", dual.space_block)
        out.extend([("spatial.out_w", sp.out_w), ("spatial.out_b", sp.out_b)])

        tp = self.temporal
        out.extend([("temporal.embed_w", tp.embed_w), ("temporal.embed_b", tp.embed_b)])
        for i, b in enumerate(tp.stage1):
            block(f"temporal.stage1.{i}", b)
        for i, b in enumerate(tp.stage2):
            block(f"temporal.stage2.{i}", b)
        out.extend([("temporal.out_w", tp.out_w), ("temporal.out_b", tp.out_b)])
        out.extend([("loss_log_var1", self.loss_log_var1), ("loss_log_var2", self.loss_log_var2)])
        return out

    def buffers(self) -> list[tuple[str, Tensor]]:
        return [("spatial.pe3d", self.spatial.pe3d), ("temporal.pe1d", self.temporal.pe1d)]

    def parameter_count(self) -> int:
        return sum(t.size for _, t in self.named_parameters())


def expected_parameter_count(c_sr: int, c_lr: int, t_len: int, hp: Hyperparams) -> int:
    """Closed-form learnable scalar count, checked against the tree walk."""
    d_sp = spatial_width(t_len, hp.alpha_space)
    d_tm = temporal_width(c_sr, hp.alpha_time)
    r = hp.mlp_ratio

    def block(d):
        return 4 * d * d + 2 * r * d * d + r * d + 5 * d

    encoder = hp.depth_space * (block(c_lr) + block(d_sp))
    decoder = hp.depth_space * (block(c_sr) + block(d_sp))
    spatial = (t_len * d_sp + d_sp) + d_sp + encoder + decoder + (d_sp * t_len + t_len)
    temporal = (c_sr * d_tm + d_tm) + 2 * hp.depth_time * block(d_tm) + (d_tm * c_sr + c_sr)
    return spatial + temporal + 2


def _trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def _init_block(rng, d: int, heads: int, ratio: int, dropout: float) -> BlockParams:
    def w(*shape):
        return param(_trunc_normal(rng, shape))
    return BlockParams(
        ln1_gain=param(np.ones(d)), ln1_bias=param(np.zeros(d)),
        msa=MSAParams(heads, w(d, d), w(d, d), w(d, d), w(d, d)),
        ln2_gain=param(np.ones(d)), ln2_bias=param(np.zeros(d)),
        mlp=MLPParams(w(d, ratio * d), param(np.zeros(ratio * d)),
                      w(ratio * d, d), param(np.zeros(d)), dropout=dropout),
    )


def _init_dual(rng, channels: int, width: int, ratio: int, dropout: float) -> DualBlockParams:
    # the time sub-block attends across the embedded axis, so its token
    # feature width is the channel count at that stage
    return DualBlockParams(
        time_block=_init_block(rng, channels, TIME_HEADS, ratio, dropout),
        space_block=_init_block(rng, width, SPACE_HEADS, ratio, dropout),
    )


def init_params(spec: MaskSpec, t_len: int, hp: Hyperparams,
                rng: np.random.Generator) -> ModelParams:
    hp.validate()
    if t_len < 2:
        raise ConfigError(f"window length must be >= 2, got {t_len}")
    c_sr, c_lr = spec.c_sr, spec.c_lr
    d_sp = spatial_width(t_len, hp.alpha_space)
    if d_sp % SPACE_HEADS != 0:
        raise ConfigError(f"spatial width {d_sp} not divisible by {SPACE_HEADS} heads")
    d_tm = temporal_width(c_sr, hp.alpha_time)

    spatial = SpatialStageParams(
        embed_w=param(_trunc_normal(rng, (t_len, d_sp))),
        embed_b=param(np.zeros(d_sp)),
        mask_token=param(rng.normal(0.0, 0.02, size=(1, d_sp))),
        encoder=[_init_dual(rng, c_lr, d_sp, hp.mlp_ratio, hp.dropout)
                 for _ in range(hp.depth_space)],
        decoder=[_init_dual(rng, c_sr, d_sp, hp.mlp_ratio, hp.dropout)
                 for _ in range(hp.depth_space)],
        out_w=param(_trunc_normal(rng, (d_sp, t_len))),
        out_b=param(np.zeros(t_len)),
        pe3d=Tensor(spatial_encoding(spec.montage, d_sp, hp.pe_scale).values),
    )
    temporal = TemporalStageParams(
        embed_w=param(_trunc_normal(rng, (c_sr, d_tm))),
        embed_b=param(np.zeros(d_tm)),
        stage1=[_init_block(rng, d_tm, TIME_HEADS, hp.mlp_ratio, hp.dropout)
                for _ in range(hp.depth_time)],
        stage2=[_init_block(rng, d_tm, TIME_HEADS, hp.mlp_ratio, hp.dropout)
                for _ in range(hp.depth_time)],
        out_w=param(_trunc_normal(rng, (d_tm, c_sr))),
        out_b=param(np.zeros(c_sr)),
        pe1d=Tensor(temporal_encoding(t_len, d_tm).values),
    )
    return ModelParams(spatial, temporal, param(np.zeros(1)), param(np.zeros(1)),
                       hp, c_sr, c_lr, t_len)


# ---------------------------------------------------------------------------
# forward passes (batched; a leading batch axis is added for 2D inputs)


def _with_batch(x: Tensor) -> tuple[Tensor, bool]:
    if x.values.ndim == 2:
        return tz.reshape(x, (1,) + x.shape), True
    return x, False


def _add_pe(z: Tensor, pe: Tensor, rows=None) -> Tensor:
    pe_rows = tz.take_rows(pe, rows) if rows is not None else pe
    return tz.add(z, tz.broadcast_to(pe_rows, z.shape))


def predict_masked(p: SpatialStageParams, x_lr: Tensor, spec: MaskSpec, hp: Hyperparams,
                   training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Spatial stage: visible waveforms in, masked-channel waveforms out."""
    x, squeeze = _with_batch(x_lr)
    if x.shape[-2] != spec.c_lr or x.shape[-1] != p.embed_w.shape[0]:
        raise ShapeError(f"spatial stage expects (..., {spec.c_lr}, {p.embed_w.shape[0]}), got {x_lr.shape}")
    vis = list(spec.visible_idx)
    mas = list(spec.masked_idx)

    z = tz.linear(x, p.embed_w, p.embed_b)
    z = _add_pe(z, p.pe3d, vis)
    for dual in p.encoder:
        z = dual_block_forward(dual, z, eps=hp.ln_eps, training=training, rng=rng,
                               outer_residual=hp.outer_residual)

    mask_tokens = tz.broadcast_to(p.mask_token, z.shape[:-2] + (spec.c_mask, p.mask_token.shape[-1]))
    full = tz.merge_rows(z, mask_tokens, vis, mas)
    full = _add_pe(full, p.pe3d)
    for dual in p.decoder:
        full = dual_block_forward(dual, full, eps=hp.ln_eps, training=training, rng=rng,
                                  outer_residual=hp.outer_residual)

    out = tz.linear(tz.take_rows(full, mas), p.out_w, p.out_b)
    return tz.reshape(out, out.shape[1:]) if squeeze else out


def refine_temporal(p: TemporalStageParams, x: Tensor, hp: Hyperparams,
                    training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Temporal stage: full channel set in, full channel set out."""
    xb, squeeze = _with_batch(x)
    if xb.shape[-2] != p.embed_w.shape[0]:
        raise ShapeError(f"temporal stage expects {p.embed_w.shape[0]} channels, got {xb.shape}")
    h = tz.linear(tz.transpose2d(xb), p.embed_w, p.embed_b)  # (B, T, D)
    h = _add_pe(h, p.pe1d)
    for b in p.stage1:
        h = attention_block_forward(b, h, eps=hp.ln_eps, training=training, rng=rng)
    h = _add_pe(h, p.pe1d)
    for b in p.stage2:
        h = attention_block_forward(b, h, eps=hp.ln_eps, training=training, rng=rng)
    y = tz.transpose2d(tz.linear(h, p.out_w, p.out_b))
    return tz.reshape(y, y.shape[1:]) if squeeze else y


def merge_channels(x_lr: Tensor, x_masked: Tensor, spec: MaskSpec) -> Tensor:
    """Interleave visible and masked rows into canonical channel order."""
    return tz.merge_rows(x_lr, x_masked, list(spec.visible_idx), list(spec.masked_idx))


def model_forward(p: ModelParams, x_lr: Tensor, spec: MaskSpec,
                  training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Full pipeline; visible rows of the result equal x_lr bit-exactly."""
    if spec.c_lr != p.c_lr or spec.c_sr != p.c_sr:
        raise ShapeError(f"mask spec ({spec.c_lr}/{spec.c_sr}) does not match model ({p.c_lr}/{p.c_sr})")
    x_masked = predict_masked(p.spatial, x_lr, spec, p.hp, training, rng)
    x_temp = merge_channels(x_lr, x_masked, spec)
    y = refine_temporal(p.temporal, x_temp, p.hp, training, rng)
    refined_masked = tz.take_rows(y, list(spec.masked_idx))
    return merge_channels(x_lr, refined_masked, spec)


def super_resolve(p: ModelParams, x_lr: np.ndarray, spec: MaskSpec,
                  batch_size: int = 64) -> np.ndarray:
    """Evaluation-mode inference over (N, C_LR, T) or a single (C_LR, T) window."""
    arr = np.asarray(x_lr, dtype=np.float64)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    outs = []
    for lo in range(0, arr.shape[0], batch_size):
        chunk = Tensor(arr[lo:lo + batch_size])
        outs.append(model_forward(p, chunk, spec, training=False).values)
    full = np.concatenate(outs, axis=0)
    return full[0] if single else full


# ---------------------------------------------------------------------------
# checkpoint format: magic ESTF, u32 version, named-scalar header block,
# u32 tensor count, then per tensor (u32 name len, name, u32 rank, dims, f64s)

_MAGIC = b"ESTF"
_VERSION = 1


def _write_scalars(buf, scalars: dict) -> None:
    buf.write(struct.pack("<I", len(scalars)))
    for name, value in scalars.items():
        raw = name.encode()
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        if isinstance(value, bool) or isinstance(value, (int, np.integer)):
            buf.write(struct.pack("<BI", 0, int(value)))
        else:
            buf.write(struct.pack("<Bd", 1, float(value)))


def _read_scalars(buf) -> dict:
    (count,) = struct.unpack("<I", buf.read(4))
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", buf.read(4))
        name = buf.read(nlen).decode()
        (tag,) = struct.unpack("<B", buf.read(1))
        if tag == 0:
            (out[name],) = struct.unpack("<I", buf.read(4))
        else:
            (out[name],) = struct.unpack("<d", buf.read(8))
    return out


def _hp_scalars(p: ModelParams) -> dict:
    hp = p.hp
    return {
        "c_sr": p.c_sr, "c_lr": p.c_lr, "t_len": p.t_len,
        "alpha_space": hp.alpha_space, "alpha_time": hp.alpha_time,
        "mlp_ratio": hp.mlp_ratio, "depth_space": hp.depth_space,
        "depth_time": hp.depth_time, "dropout": hp.dropout,
        "ln_eps": hp.ln_eps, "pe_scale": hp.pe_scale,
        "outer_residual": int(hp.outer_residual),
    }


def save_checkpoint(path, p: ModelParams, extra: dict | None = None) -> None:
    """Serialize hyperparameters plus every parameter and buffer tensor."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", _VERSION))
    scalars = _hp_scalars(p)
    for key, value in (extra or {}).items():
        scalars[f"x.{key}"] = value
    _write_scalars(buf, scalars)
    tensors = p.named_parameters() + p.buffers()
    buf.write(struct.pack("<I", len(tensors)))
    for name, t in tensors:
        raw = name.encode()
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", t.values.ndim))
        for dim in t.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(np.ascontiguousarray(t.values, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path, spec: MaskSpec) -> tuple[ModelParams, dict]:
    """Rebuild a model from a checkpoint; the MaskSpec supplies channel routing."""
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise ConfigError(f"{path}: not a model checkpoint")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != _VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {version}")
    scalars = _read_scalars(buf)
    extra = {k[2:]: v for k, v in scalars.items() if k.startswith("x.")}

    hp = Hyperparams(
        alpha_space=scalars["alpha_space"], alpha_time=scalars["alpha_time"],
        mlp_ratio=int(scalars["mlp_ratio"]), depth_space=int(scalars["depth_space"]),
        depth_time=int(scalars["depth_time"]), dropout=scalars["dropout"],
        ln_eps=scalars["ln_eps"], pe_scale=scalars["pe_scale"],
        outer_residual=bool(scalars["outer_residual"]),
    )
    if spec.c_sr != scalars["c_sr"] or spec.c_lr != scalars["c_lr"]:
        raise ConfigError(
            f"checkpoint was trained for {scalars['c_lr']}/{scalars['c_sr']} channels, "
            f"mask spec has {spec.c_lr}/{spec.c_sr}")
    p = init_params(spec, int(scalars["t_len"]), hp, np.random.default_rng(0))

    (count,) = struct.unpack("<I", buf.read(4))
    by_name = dict(p.named_parameters() + p.buffers())
    seen = set()
    for _ in range(count):
        (nlen,) = struct.unpack("<I", buf.read(4))
        name = buf.read(nlen).decode()
        (rank,) = struct.unpack("<I", buf.read(4))
        dims = struct.unpack(f"<{rank}I", buf.read(4 * rank))
        n = int(np.prod(dims))
        values = np.frombuffer(buf.read(8 * n), dtype="<f8").reshape(dims)
        if name not in by_name:
            raise ConfigError(f"{path}: unexpected tensor {name!r}")
        if by_name[name].shape != dims:
            raise ConfigError(f"{path}: tensor {name!r} has shape {dims}, expected {by_name[name].shape}")
        by_name[name].values = values.copy()
        seen.add(name)
    missing = set(by_name) - seen
    if missing:
        raise ConfigError(f"{path}: checkpoint is missing tensors: {sorted(missing)[:3]}...")
    return p, extra
