"""Pure numpy sign-sum kernel; same contract as the compiled extension."""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 14


def _sign_block(N: int, start: int, stop: int) -> np.ndarray:
    # patterns with eps_0 = +1; bit k of the pattern index drives eps_{k+1}
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(N - 1, dtype=np.int64)[None, :]) & 1
    eps = 1.0 - 2.0 * bits
    return np.concatenate([np.ones((stop - start, 1)), eps], axis=1)


def norm_pow(V: np.ndarray, p: float, q: float, r: float, block: int, weight: float) -> np.ndarray:
    """``||v||^p`` for each row of ``V`` under the mixed block norm."""
    a = np.abs(V.reshape(V.shape[0], -1, block))
    if q == 2.0:
        inner = np.einsum("kbi,kbi->kb", a, a)
        blocks = inner if r == 2.0 else inner ** (r / 2.0)
    else:
        inner = np.sum(a**q, axis=-1)
        blocks = inner if r == q else inner ** (r / q)
    total = weight * np.sum(blocks, axis=-1)
    return total if p == r else total ** (p / r)


def sign_sum(Y, p: float, q: float, r: float, block: int, weight: float) -> float:
    """Sum over all 2^N sign patterns of ||sum_j eps_j y_j||^p."""
    Y = np.ascontiguousarray(Y, dtype=complex)
    N, D = Y.shape
    if N == 0:
        return 0.0
    if D % block:
        raise ValueError("block size must divide the vector length")
    total = 0.0
    n_pat = 1 << (N - 1)
    for start in range(0, n_pat, _CHUNK):
        stop = min(n_pat, start + _CHUNK)
        V = _sign_block(N, start, stop) @ Y
        total += float(np.sum(norm_pow(V, p, q, r, block, weight)))
    return 2.0 * total
