"""Pure-Python fallback for the compiled kernels in ``_ckernels.pyx``.

Operation order mirrors the Cython source so both backends agree bit for bit.
"""
from __future__ import annotations

import math

import numpy as np


def bin_counts(scores: np.ndarray, low: float, high: float, counts: np.ndarray) -> int:
    bins = counts.shape[0]
    inside = (scores >= low) & (scores <= high)
    if not inside.all():
        return int(np.argmin(inside))
    idx = ((scores - low) / (high - low) * bins).astype(np.int64)
    np.minimum(idx, bins - 1, out=idx)
    counts += np.bincount(idx, minlength=bins)
    return -1


def kl_bits(p: np.ndarray, q: np.ndarray) -> float:
    total = 0.0
    for pi, qi in zip(p.tolist(), q.tolist()):
        if pi > 0.0:
            if qi <= 0.0:
                return math.inf
            total += pi * math.log2(pi / qi)
    return total


def js_bits(p: np.ndarray, q: np.ndarray) -> float:
    left = 0.0
    right = 0.0
    for pi, qi in zip(p.tolist(), q.tolist()):
        m = 0.5 * (pi + qi)
        if pi > 0.0:
            left += pi * math.log2(pi / m)
        if qi > 0.0:
            right += qi * math.log2(qi / m)
    return 0.5 * left + 0.5 * right


def js_rows(p: np.ndarray, q: np.ndarray, out: np.ndarray) -> None:
    for r in range(p.shape[0]):
        out[r] = js_bits(p[r], q[r])
