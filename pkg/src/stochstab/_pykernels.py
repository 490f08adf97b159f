"""Pure-numpy versions of the compiled kernels.

Loops run over time and are vectorized over the batch of orbits, calling
the reference formulas of each system.
"""
import numpy as np


def iterate(system, x0: np.ndarray, noise: np.ndarray) -> np.ndarray:
    m, n, D = noise.shape
    out = np.empty((m, n + 1, D))
    x = np.array(x0, dtype=float)
    out[:, 0] = x
    for j in range(n):
        x = system.step(x, noise[:, j])
        out[:, j + 1] = x
    return out


def bin_index(domain, X: np.ndarray, bins) -> np.ndarray:
    """Row-major flat cell index of each point of ``X`` (shape ``(m, D)``)."""
    idx = np.zeros(X.shape[0], dtype=np.int64)
    for c in range(domain.dim):
        lo = domain.lows[c]
        length = domain.highs[c] - lo
        k = np.floor((X[:, c] - lo) / length * bins[c]).astype(np.int64)
        k = np.clip(k, 0, bins[c] - 1)
        idx = idx * bins[c] + k
    return idx


def occupation(system, x0, noise, bins, skip, counts):
    m, n, D = noise.shape
    x = np.array(x0, dtype=float)
    for j in range(n):
        if j >= skip:
            counts += np.bincount(bin_index(system.domain, x, bins), minlength=counts.size)
        x = system.step(x, noise[:, j])
    return x
