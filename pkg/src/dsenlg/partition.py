"""Division and fusion: split the majority class into balanced subsets.

Majority rows are ordered by a feature-weighted index ``y = sum(x**2) / sum(x)``
(each feature weighted by its own share of the row sum) and cut into
consecutive blocks of ``n_minority`` rows; every block is paired with all
minority rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MAJORITY, MINORITY


@dataclass(frozen=True)
class BalancedSubset:
    subset_index: int
    majority_indices: np.ndarray
    minority_indices: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([self.minority_indices, self.majority_indices])


def feature_weight_index(x) -> float:
    """Feature-weighted sum of one (already non-negative) sample; 0 for an all-zero row."""
    x = np.asarray(x, dtype=float)
    total = x.sum()
    if total == 0:
        return 0.0
    return float(np.sum(x * x) / total)


def feature_weight_indices(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    total = X.sum(axis=1)
    sq = np.sum(X * X, axis=1)
    out = np.zeros(len(X))
    nz = total != 0
    out[nz] = sq[nz] / total[nz]
    return out


def subset_count(n_majority: int, n_minority: int) -> int:
    if n_minority < 1:
        raise ValueError("need at least one minority sample")
    return max(1, n_majority // n_minority)


def divide_and_fuse(X, labels, keep_remainder: bool = False) -> list[BalancedSubset]:
    """Balanced subsets over the rows of ``X``.

    Features are shifted by their column minimum (over ``X``) before the
    index is computed, so negative inputs still order by magnitude. The
    ``n_majority - Q * n_minority`` highest-index majority rows are dropped
    unless ``keep_remainder`` appends them to the last subset.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    mino = np.flatnonzero(labels == MINORITY)
    majo = np.flatnonzero(labels == MAJORITY)
    if len(mino) == 0 or len(majo) == 0:
        raise ValueError("both classes must be present")
    shifted = X - X.min(axis=0)
    y = feature_weight_indices(shifted[majo])
    order = majo[np.argsort(y, kind="stable")]
    n2 = len(mino)
    Q = subset_count(len(majo), n2)
    subsets = []
    for q in range(Q):
        block = order[q * n2:(q + 1) * n2]
        if keep_remainder and q == Q - 1:
            block = order[q * n2:]
        subsets.append(BalancedSubset(q, block, mino.copy()))
    return subsets
