"""Dense float64 tensors (rank 1..3) with reverse-mode autodiff.

A forward pass optionally runs under a ``Tape``; every op that sees a traced
input appends its backward rule, and ``Tape.backward`` replays the rules in
reverse recording order (which is a valid topological order for a
define-by-run graph). Without an active tape, ops just compute values, so
evaluation-mode forwards carry no bookkeeping cost.

Values are immutable by convention once produced by an op; only leaf tensors
(parameters) are rewritten in place, and only between tapes.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

Array = np.ndarray

_TAPES: list["Tape"] = []


def _as_array(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 3:
        raise ShapeError(f"rank {arr.ndim} tensors unsupported (max rank is 3)")
    return arr


class Tensor:
    """Dense float64 array of rank 1..3, optionally tracked for gradients."""

    __slots__ = ("values", "requires_grad", "grad", "_traced")

    def __init__(self, values, requires_grad: bool = False):
        self.values: Array = _as_array(values)
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self._traced = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def param(values) -> Tensor:
    """A leaf tensor that accumulates gradients."""
    return Tensor(np.ascontiguousarray(values, dtype=np.float64), requires_grad=True)


def constant(values) -> Tensor:
    return Tensor(values)


class Tape:
    """Ordered record of one forward pass; backward replays rules in reverse."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, Callable[[], None]]] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPES.pop()
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and accumulate gradients into all traced leaves."""
        if loss.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.values)
        for out, rule in reversed(self._nodes):
            if out.grad is not None:
                rule()


def _tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _accum(t: Tensor, g: Array) -> None:
    if not t._traced:
        return
    t.grad = g if t.grad is None else t.grad + g


def _op(out_values: Array, inputs: tuple[Tensor, ...], make_rule) -> Tensor:
    out = Tensor(out_values)
    tape = _tape()
    if tape is not None and any(t._traced for t in inputs):
        out._traced = True
        tape._nodes.append((out, make_rule(out)))
    return out


def _sum_to_shape(g: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a gradient produced under broadcasting back to the input shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim < 2 or bv.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {av.shape} x {bv.shape}")
    if av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {av.shape} x {bv.shape}")

    def make_rule(out):
        def rule():
            g = out.grad
            if a._traced:
                _accum(a, _sum_to_shape(g @ np.swapaxes(bv, -1, -2), av.shape))
            if b._traced:
                _accum(b, _sum_to_shape(np.swapaxes(av, -1, -2) @ g, bv.shape))
        return rule

    return _op(av @ bv, (a, b), make_rule)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with the bias broadcast over leading axes."""
    xv, wv, bv = x.values, w.values, b.values
    if wv.ndim != 2 or bv.ndim != 1:
        raise ShapeError(f"linear expects 2D weight and 1D bias, got {wv.shape}, {bv.shape}")
    if xv.shape[-1] != wv.shape[0] or bv.shape[0] != wv.shape[1]:
        raise ShapeError(f"linear shapes disagree: x {xv.shape}, w {wv.shape}, b {bv.shape}")

    def make_rule(out):
        def rule():
            g = out.grad
            if x._traced:
                _accum(x, g @ wv.T)
            if w._traced:
                _accum(w, _sum_to_shape(np.swapaxes(xv, -1, -2) @ g, wv.shape))
            if b._traced:
                _accum(b, g.reshape(-1, g.shape[-1]).sum(axis=0))
        return rule

    return _op(xv @ wv + bv, (x, w, b), make_rule)


def transpose2d(a: Tensor) -> Tensor:
    """Swap the last two axes (batched matrices transpose per batch element)."""
    if a.values.ndim < 2:
        raise ShapeError(f"transpose2d needs rank >= 2, got {a.shape}")

    def make_rule(out):
        def rule():
            _accum(a, np.swapaxes(out.grad, -1, -2))
        return rule

    return _op(np.swapaxes(a.values, -1, -2), (a,), make_rule)


# ---------------------------------------------------------------------------
# elementwise and reductions


def _same_shape(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name} shape mismatch: {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")

    def make_rule(out):
        def rule():
            _accum(a, out.grad)
            _accum(b, out.grad)
        return rule

    return _op(a.values + b.values, (a, b), make_rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")

    def make_rule(out):
        def rule():
            _accum(a, out.grad)
            _accum(b, -out.grad)
        return rule

    return _op(a.values - b.values, (a, b), make_rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    av, bv = a.values, b.values

    def make_rule(out):
        def rule():
            _accum(a, out.grad * bv)
            _accum(b, out.grad * av)
        return rule

    return _op(av * bv, (a, b), make_rule)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def make_rule(out):
        def rule():
            _accum(a, c * out.grad)
        return rule

    return _op(c * a.values, (a,), make_rule)


def cmul(a: Tensor, c) -> Tensor:
    """Elementwise multiply by a constant array of the same shape."""
    cv = np.asarray(c, dtype=np.float64)
    if cv.shape != a.shape:
        raise ShapeError(f"cmul shape mismatch: {a.shape} vs {cv.shape}")

    def make_rule(out):
        def rule():
            _accum(a, out.grad * cv)
        return rule

    return _op(a.values * cv, (a,), make_rule)


def exp(a: Tensor) -> Tensor:
    ev = np.exp(a.values)

    def make_rule(out):
        def rule():
            _accum(a, out.grad * ev)
        return rule

    return _op(ev, (a,), make_rule)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximation GELU, elementwise."""
    v = x.values
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    th = np.tanh(inner)

    def make_rule(out):
        def rule():
            sech2 = 1.0 - th * th
            dinner = _GELU_C * (1.0 + 3.0 * 0.044715 * v * v)
            _accum(x, out.grad * (0.5 * (1.0 + th) + 0.5 * v * sech2 * dinner))
        return rule

    return _op(0.5 * v * (1.0 + th), (x,), make_rule)


def mean(a: Tensor) -> Tensor:
    n = a.size

    def make_rule(out):
        def rule():
            _accum(a, np.full_like(a.values, out.grad.reshape(-1)[0] / n))
        return rule

    return _op(np.array([a.values.mean()]), (a,), make_rule)


def sum_abs(a: Tensor) -> Tensor:
    av = a.values

    def make_rule(out):
        def rule():
            # subgradient: sign(0) = 0 at exact ties
            _accum(a, out.grad.reshape(-1)[0] * np.sign(av))
        return rule

    return _op(np.array([np.abs(av).sum()]), (a,), make_rule)


def sum_sq(a: Tensor) -> Tensor:
    av = a.values

    def make_rule(out):
        def rule():
            _accum(a, out.grad.reshape(-1)[0] * 2.0 * av)
        return rule

    return _op(np.array([(av * av).sum()]), (a,), make_rule)


# ---------------------------------------------------------------------------
# shape plumbing


def concat(a: Tensor, b: Tensor, axis: int) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim != bv.ndim:
        raise ShapeError(f"concat rank mismatch: {av.shape} vs {bv.shape}")
    axis = axis if axis >= 0 else av.ndim + axis
    if not 0 <= axis < av.ndim:
        raise ShapeError(f"concat axis {axis} out of bounds for rank {av.ndim}")
    for ax in range(av.ndim):
        if ax != axis and av.shape[ax] != bv.shape[ax]:
            raise ShapeError(f"concat shape mismatch off-axis: {av.shape} vs {bv.shape}")
    na = av.shape[axis]

    def make_rule(out):
        def rule():
            g = out.grad
            idx_a = tuple(slice(None) if ax != axis else slice(0, na) for ax in range(g.ndim))
            idx_b = tuple(slice(None) if ax != axis else slice(na, None) for ax in range(g.ndim))
            _accum(a, g[idx_a])
            _accum(b, g[idx_b])
        return rule

    return _op(np.concatenate([av, bv], axis=axis), (a, b), make_rule)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    av = a.values
    axis = axis if axis >= 0 else av.ndim + axis
    if not 0 <= axis < av.ndim:
        raise ShapeError(f"slice axis {axis} out of bounds for rank {av.ndim}")
    if not 0 <= start < stop <= av.shape[axis]:
        raise ShapeError(f"slice range [{start}, {stop}) invalid for axis of size {av.shape[axis]}")
    idx = tuple(slice(None) if ax != axis else slice(start, stop) for ax in range(av.ndim))

    def make_rule(out):
        def rule():
            g = np.zeros_like(av)
            g[idx] = out.grad
            _accum(a, g)
        return rule

    return _op(av[idx], (a,), make_rule)


def take_rows(a: Tensor, idx) -> Tensor:
    """Gather rows (axis -2) by an index list; batched over a leading axis."""
    av = a.values
    if av.ndim < 2:
        raise ShapeError(f"take_rows needs rank >= 2, got {a.shape}")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= av.shape[-2])):
        raise ShapeError(f"take_rows indices out of bounds for {av.shape[-2]} rows")

    def make_rule(out):
        def rule():
            g = np.zeros_like(av)
            gt = np.moveaxis(g, -2, 0)
            np.add.at(gt, idx, np.moveaxis(out.grad, -2, 0))
            _accum(a, g)
        return rule

    return _op(av[..., idx, :], (a,), make_rule)


def merge_rows(visible: Tensor, masked: Tensor, visible_idx, masked_idx) -> Tensor:
    """Scatter two row blocks into one tensor along axis -2.

    visible_idx and masked_idx must partition 0..C-1 exactly; row i of the
    output is copied bit-exactly from whichever input owns index i.
    """
    vv, mv = visible.values, masked.values
    if vv.ndim != mv.ndim or vv.ndim < 2:
        raise ShapeError(f"merge_rows rank mismatch: {vv.shape} vs {mv.shape}")
    if vv.shape[:-2] != mv.shape[:-2] or vv.shape[-1] != mv.shape[-1]:
        raise ShapeError(f"merge_rows off-axis shapes differ: {vv.shape} vs {mv.shape}")
    vi = np.asarray(visible_idx, dtype=np.intp)
    mi = np.asarray(masked_idx, dtype=np.intp)
    if vi.size != vv.shape[-2] or mi.size != mv.shape[-2]:
        raise ShapeError("merge_rows index lists do not match row counts")
    total = vi.size + mi.size
    combined = np.concatenate([vi, mi])
    if len(np.unique(combined)) != total or combined.min() != 0 or combined.max() != total - 1:
        raise ShapeError("merge_rows indices must partition 0..C-1 with no overlap")

    out_shape = vv.shape[:-2] + (total, vv.shape[-1])
    ov = np.empty(out_shape, dtype=np.float64)
    ov[..., vi, :] = vv
    ov[..., mi, :] = mv

    def make_rule(out):
        def rule():
            g = out.grad
            _accum(visible, g[..., vi, :])
            _accum(masked, g[..., mi, :])
        return rule

    return _op(ov, (visible, masked), make_rule)


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    av = a.values
    try:
        ov = np.broadcast_to(av, shape)
    except ValueError as e:
        raise ShapeError(f"cannot broadcast {av.shape} to {shape}") from e

    def make_rule(out):
        def rule():
            _accum(a, _sum_to_shape(out.grad, av.shape))
        return rule

    return _op(ov, (a,), make_rule)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    av = a.values
    if int(np.prod(shape)) != av.size:
        raise ShapeError(f"cannot reshape {av.shape} to {shape}")

    def make_rule(out):
        def rule():
            _accum(a, out.grad.reshape(av.shape))
        return rule

    return _op(av.reshape(shape), (a,), make_rule)


# ---------------------------------------------------------------------------
# normalization / attention ingredients


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax along the last axis, max-shifted for stability."""
    v = a.values
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def make_rule(out):
        def rule():
            g = out.grad
            dot = (g * s).sum(axis=-1, keepdims=True)
            _accum(a, (g - dot) * s)
        return rule

    return _op(s, (a,), make_rule)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row (last axis) to mean 0 / variance 1, then affine."""
    if eps <= 0:
        raise ValueError(f"layer_norm eps must be positive, got {eps}")
    v = a.values
    n = v.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(f"layer_norm gain/bias must be shape ({n},), got {gain.shape}, {bias.shape}")
    mu = v.mean(axis=-1, keepdims=True)
    xc = v - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gv, bv = gain.values, bias.values

    def make_rule(out):
        def rule():
            g = out.grad
            if gain._traced:
                _accum(gain, (g * xhat).reshape(-1, n).sum(axis=0))
            if bias._traced:
                _accum(bias, g.reshape(-1, n).sum(axis=0))
            if a._traced:
                dxhat = g * gv
                m1 = dxhat.mean(axis=-1, keepdims=True)
                m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
                _accum(a, (dxhat - m1 - xhat * m2) * inv)
        return rule

    return _op(xhat * gv + bv, (a, gain, bias), make_rule)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Zero elements with probability ``rate`` and rescale survivors (training only)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def make_rule(out):
        def rule():
            _accum(x, out.grad * keep)
        return rule

    return _op(x.values * keep, (x,), make_rule)


# ---------------------------------------------------------------------------
# spectral


@lru_cache(maxsize=16)
def _dft_basis(t_len: int) -> tuple[Array, Array]:
    t = np.arange(t_len)
    k = np.arange(t_len // 2 + 1)
    theta = 2.0 * np.pi * np.outer(k, t) / t_len
    return np.cos(theta), np.sin(theta)


def rdft(x: Tensor) -> Tensor:
    """Unnormalized forward DFT of real rows; keeps nonnegative frequencies.

    Input rows of length T map to (T//2 + 1, 2) blocks holding the real and
    imaginary parts. Linear operator; the backward rule is its exact adjoint.
    """
    xv = x.values
    if xv.ndim > 2:
        raise ShapeError(f"rdft input rank must be <= 2, got {xv.shape}")
    t_len = xv.shape[-1]
    if t_len < 1:
        raise ShapeError("rdft needs length >= 1")
    spec = np.fft.rfft(xv, axis=-1)
    ov = np.stack([spec.real, spec.imag], axis=-1)

    def make_rule(out):
        def rule():
            g = out.grad
            ccos, csin = _dft_basis(t_len)
            _accum(x, g[..., 0] @ ccos - g[..., 1] @ csin)
        return rule

    return _op(ov, (x,), make_rule)


# ---------------------------------------------------------------------------
# classification head


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of row-wise softmax against integer labels."""
    lv = logits.values
    y = np.asarray(labels, dtype=np.intp)
    if lv.ndim != 2 or y.shape != (lv.shape[0],):
        raise ShapeError(f"cross entropy expects (N, K) logits and (N,) labels, got {lv.shape}, {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= lv.shape[1]):
        raise ShapeError("labels out of range")
    shifted = lv - lv.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    n = lv.shape[0]
    rows = np.arange(n)

    def make_rule(out):
        def rule():
            p = np.exp(logp)
            p[rows, y] -= 1.0
            _accum(logits, out.grad.reshape(-1)[0] * p / n)
        return rule

    return _op(np.array([-(logp[rows, y]).mean()]), (logits,), make_rule)


# ---------------------------------------------------------------------------
# verification

def grad_check(f, x, h: float = 1e-4) -> float:
    """Max discrepancy between tape gradients and central finite differences.

    ``f`` maps the given tensor (or sequence of tensors) to a scalar Tensor
    and must be deterministic. Every checked tensor needs requires_grad.
    The error measure per component is |g_tape - g_fd| / max(|g_tape|,
    |g_fd|, 1), i.e. relative for large gradients, absolute near zero.
    """
    xs = (x,) if isinstance(x, Tensor) else tuple(x)
    for t in xs:
        t.grad = None
    with Tape() as tape:
        loss = f(x)
        tape.backward(loss)
    tape_grads = [np.zeros_like(t.values) if t.grad is None else np.array(t.grad) for t in xs]

    worst = 0.0
    for t, gt in zip(xs, tape_grads):
        for idx in np.ndindex(t.values.shape):
            orig = t.values[idx]
            t.values[idx] = orig + h
            fp = f(x).item()
            t.values[idx] = orig - h
            fm = f(x).item()
            t.values[idx] = orig
            fd = (fp - fm) / (2.0 * h)
            err = abs(gt[idx] - fd) / max(abs(gt[idx]), abs(fd), 1.0)
            worst = max(worst, err)
    return worst


def validate_finite(tensors: Sequence[Tensor] | Tensor, context: str = "") -> None:
    """Raise NumericError if any tensor holds NaN/Inf values."""
    ts = (tensors,) if isinstance(tensors, Tensor) else tensors
    for t in ts:
        if not np.isfinite(t.values).all():
            where = f" in {context}" if context else ""
            raise NumericError(f"non-finite values detected{where}")
