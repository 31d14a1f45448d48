"""Independent oracles shared across test modules.

These deliberately use explicit loops / direct summation so they stay
independent of the library code paths they are checking.
"""

import numpy as np


def loop_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += a[i, p] * b[p, j]
            out[i, j] = s
    return out


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Full O(T^2) complex DFT of a real vector, all T bins."""
    t_len = len(x)
    out = np.zeros(t_len, dtype=complex)
    for k in range(t_len):
        s = 0.0 + 0.0j
        for t in range(t_len):
            s += x[t] * np.exp(-2j * np.pi * k * t / t_len)
        out[k] = s
    return out


def loop_attention(z: np.ndarray, wq, wk, wv, wo, num_heads: int) -> np.ndarray:
    """Single-sample multi-head attention by explicit per-head loops."""
    n, d = z.shape
    hw = d // num_heads
    q = z @ wq
    k = z @ wk
    v = z @ wv
    heads = []
    for h in range(num_heads):
        sl = slice(h * hw, (h + 1) * hw)
        scores = q[:, sl] @ k[:, sl].T / np.sqrt(hw)
        scores = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        probs = e / e.sum(axis=1, keepdims=True)
        heads.append(probs @ v[:, sl])
    return np.concatenate(heads, axis=1) @ wo
