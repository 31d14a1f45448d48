"""Training and evaluation loops for the super-resolution model.

A run is fully determined by (model seed, TrainConfig.seed, data): batch
shuffling and dropout draw from generators spawned off one seed sequence,
and steps execute strictly in order, so repeated runs produce bit-identical
logs and checkpoints.
"""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .data import EEGDataset
from .errors import ConfigError, UndefinedMetricError
from .losses import auto_weighted_loss, freq_mse, mae_loss, nmse, pcc
from .masks import MaskSpec
from .model import ModelParams, model_forward, super_resolve
from .optim import AdamWState, TrainConfig, adamw_step, clip_gradients
from .tensor import Tape, Tensor, validate_finite

LOG_HEADER = ("epoch,train_total,train_fmse,train_mae,sigma1_sq,sigma2_sq,"
              "test_nmse,test_snr,test_pcc,seconds")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_total: float
    train_fmse: float
    train_mae: float
    sigma1_sq: float
    sigma2_sq: float
    test_nmse: float
    test_snr: float
    test_pcc: float
    seconds: float

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.train_total:.10g},{self.train_fmse:.10g},"
                f"{self.train_mae:.10g},{self.sigma1_sq:.10g},{self.sigma2_sq:.10g},"
                f"{self.test_nmse:.10g},{self.test_snr:.10g},{self.test_pcc:.10g},"
                f"{self.seconds:.3f}")


@dataclass
class TrainResult:
    params: ModelParams        # best-by-test-NMSE snapshot
    final_params: ModelParams
    log: list[EpochLog]
    best_epoch: int


def train_step(p: ModelParams, x_lr: np.ndarray, x_gt_masked: np.ndarray, spec: MaskSpec,
               cfg: TrainConfig, state: AdamWState, rng: np.random.Generator,
               no_decay: frozenset[int]) -> tuple[float, float, float]:
    """One forward/backward/update on a batch; returns (total, fmse, mae)."""
    named = p.named_parameters()
    leaves = [t for _, t in named]
    for t in leaves:
        t.grad = None
    with Tape() as tape:
        x_sr = model_forward(p, Tensor(x_lr), spec, training=True, rng=rng)
        pred = tz.take_rows(x_sr, list(spec.masked_idx))
        batch = x_lr.shape[0] if x_lr.ndim == 3 else 1
        fm = tz.scale(freq_mse(Tensor(x_gt_masked), pred), 1.0 / batch)
        ma = tz.scale(mae_loss(Tensor(x_gt_masked), pred), 1.0 / batch)
        total, breakdown = auto_weighted_loss(fm, ma, p.loss_log_var1, p.loss_log_var2)
        tape.backward(total)
    grads = [t.grad if t.grad is not None else np.zeros_like(t.values) for t in leaves]
    if cfg.clip_norm > 0:
        clip_gradients(grads, cfg.clip_norm)
    adamw_step(leaves, grads, state, cfg, no_decay)
    return breakdown.total, breakdown.fmse, breakdown.mae


def _no_decay_indices(p: ModelParams) -> frozenset[int]:
    return frozenset(
        i for i, (name, _) in enumerate(p.named_parameters())
        if name.startswith("loss_log_var")
    )


def evaluate(predict, dataset: EEGDataset, spec: MaskSpec) -> dict[str, float]:
    """Per-sample masked-channel metrics aggregated as mean/std.

    ``predict`` maps a (N, C_LR, T) array to (N, C_SR, T); any callable with
    that contract works (trained model, baseline, or oracle). A sample whose
    correlation is undefined (constant rows) contributes NaN to the pcc
    aggregate; nmse and snr always report.
    """
    if len(dataset.windows) == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    x_lr, x_gt_masked = spec.split_rows(dataset.windows)
    x_sr = predict(x_lr)
    rows = []
    for i in range(len(dataset.windows)):
        pred_masked = spec.split_rows(x_sr[i])[1]
        n = nmse(x_gt_masked[i], pred_masked)
        s = math.inf if n == 0.0 else -10.0 * math.log10(n)
        try:
            p = pcc(x_gt_masked[i], pred_masked)
        except UndefinedMetricError:
            p = math.nan
        rows.append((n, s, p))
    arr = np.array(rows)
    return {
        "nmse": float(arr[:, 0].mean()), "nmse_std": float(arr[:, 0].std()),
        "snr": float(arr[:, 1].mean()), "snr_std": float(arr[:, 1].std()),
        "pcc": float(arr[:, 2].mean()), "pcc_std": float(arr[:, 2].std()),
    }


def model_predictor(p: ModelParams, spec: MaskSpec, batch_size: int = 64):
    return lambda x_lr: super_resolve(p, x_lr, spec, batch_size=batch_size)


def train(p: ModelParams, spec: MaskSpec, train_ds: EEGDataset, test_ds: EEGDataset,
          cfg: TrainConfig) -> TrainResult:
    """Mini-batch training with per-epoch test metrics and best-model tracking."""
    cfg.validate()
    if len(train_ds.windows) == 0:
        raise ConfigError("training dataset is empty")
    if train_ds.windows.shape[1] != spec.c_sr or train_ds.windows.shape[2] != p.t_len:
        raise ConfigError(
            f"dataset windows {train_ds.windows.shape[1:]} do not match model "
            f"({spec.c_sr}, {p.t_len})")

    seq = np.random.SeedSequence(cfg.seed)
    shuffle_rng, dropout_rng = [np.random.default_rng(s) for s in seq.spawn(2)]
    state = AdamWState.for_params([t for _, t in p.named_parameters()])
    no_decay = _no_decay_indices(p)

    x_lr_all, x_gt_masked_all = spec.split_rows(train_ds.windows)
    n = len(train_ds.windows)
    log: list[EpochLog] = []
    best_nmse = np.inf
    best_epoch = -1
    best_params = None

    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        order = shuffle_rng.permutation(n)
        totals = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            totals.append(train_step(p, x_lr_all[idx], x_gt_masked_all[idx], spec,
                                     cfg, state, dropout_rng, no_decay))
        validate_finite([t for _, t in p.named_parameters()], f"epoch {epoch}")
        metrics = evaluate(model_predictor(p, spec), test_ds, spec)
        mean = np.array(totals).mean(axis=0)
        log.append(EpochLog(
            epoch=epoch, train_total=float(mean[0]), train_fmse=float(mean[1]),
            train_mae=float(mean[2]),
            sigma1_sq=float(np.exp(p.loss_log_var1.item())),
            sigma2_sq=float(np.exp(p.loss_log_var2.item())),
            test_nmse=metrics["nmse"], test_snr=metrics["snr"], test_pcc=metrics["pcc"],
            seconds=time.perf_counter() - tic,
        ))
        if metrics["nmse"] < best_nmse:
            best_nmse = metrics["nmse"]
            best_epoch = epoch
            best_params = copy.deepcopy(p)

    return TrainResult(params=best_params, final_params=p, log=log, best_epoch=best_epoch)


def write_log_csv(path, log: list[EpochLog]) -> None:
    with open(path, "w") as f:
        f.write(LOG_HEADER + "\n")
        for row in log:
            f.write(row.csv_row() + "\n")
