"""Small dense numeric kernels with explicit stability guarantees.

Matrices are plain float64 numpy arrays. Masks are boolean arrays; -inf only
ever appears inside these kernels, never as an input sentinel.
"""

from __future__ import annotations

import numpy as np


class EmptyInput(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class FullyMaskedRow(ValueError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has no allowed entries")


def log_sum_exp(values) -> float:
    """log(sum(exp(v))) with max-shifting; -inf entries are absorbing zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyInput("log_sum_exp of empty vector")
    m = np.max(v)
    if np.isneginf(m):
        return float("-inf")
    return float(m + np.log(np.sum(np.exp(v - m))))


def softmax_masked(scores, allow) -> np.ndarray:
    """Row-wise softmax restricted to allowed entries; disallowed entries are 0."""
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(allow, dtype=bool)
    if s.shape != a.shape:
        raise ShapeMismatch(f"scores {s.shape} vs allow {a.shape}")
    rows_allowed = a.any(axis=-1)
    if not rows_allowed.all():
        raise FullyMaskedRow(int(np.argmin(rows_allowed)))
    masked = np.where(a, s, -np.inf)
    m = masked.max(axis=-1, keepdims=True)
    e = np.exp(masked - m)
    return e / e.sum(axis=-1, keepdims=True)


def affine(x, W, b) -> np.ndarray:
    """W @ x + b."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"W {W.shape}, x {x.shape}, b {b.shape}")
    return W @ x + b
