"""Binary gain-ratio decision tree on real-valued features (C4.5-style splits).

Nodes live in flat arrays: ``feature[i] == -1`` marks a leaf, otherwise rows
with ``x[feature] <= threshold`` go to ``left[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 12
    min_samples_split: int = 2
    min_gain_ratio: float = 1e-7

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    minority_fraction: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def leaf_label(self, node: int) -> int:
        # a 50/50 leaf goes to the minority class
        return int(self.minority_fraction[node] >= 0.5)

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X):
        """Labels and leaf minority fractions for every row of ``X``."""
        leaves = self.apply(X)
        frac = self.minority_fraction[leaves]
        return (frac >= 0.5).astype(np.int8), frac

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "minority_fraction": [float(f) for f in self.minority_fraction],
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=int),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=int),
            np.asarray(d["right"], dtype=int),
            np.asarray(d["minority_fraction"], dtype=float),
            int(d["n_features"]),
        )


def train_tree(X, y, params: TreeParams = TreeParams(), seed: int = 0) -> DecisionTree:
    """Grow a tree greedily by gain ratio.

    Splitting stops on a pure node, ``max_depth``, fewer than
    ``min_samples_split`` rows, or a best gain ratio below ``min_gain_ratio``.
    Exact ties between candidate splits resolve by feature index, so ``seed``
    has no effect on the result.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(np.int8).ravel()
    if len(X) == 0:
        raise ValueError("cannot train a tree on an empty sample")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    feature, threshold, left, right, frac = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        frac.append(float(y[rows].mean()))
        return len(feature) - 1

    root = new_node(np.arange(len(X)))
    stack = [(root, np.arange(len(X)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        pos = int(y[rows].sum())
        if pos in (0, len(rows)) or depth >= params.max_depth \
                or len(rows) < params.min_samples_split:
            continue
        f, thr, ratio, _ = _kernels.best_split(X[rows], y[rows])
        if f < 0 or ratio < params.min_gain_ratio:
            continue
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return DecisionTree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.asarray(frac, dtype=float),
        X.shape[1],
    )


def predict_tree(tree: DecisionTree, x):
    """Label and minority fraction for a single sample."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_tree takes one sample; use DecisionTree.predict for batches")
    labels, frac = tree.predict(x[None, :])
    return int(labels[0]), float(frac[0])
