"""Sample neighborhood concatenation and multilayer fuzzy C-means.

The envelope of a sample is the sample followed by its K nearest neighbors
(nearest first). Layered FCM then replaces a sample set by its prototypes,
feeding each layer's prototypes to the next.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class DsenConfig:
    K: int = 3
    L: int = 3
    cluster_schedule: float | tuple[int, ...] = 0.8
    m: float = 2.0
    epsilon: float = 1e-5
    max_iter: int = 200

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if not self.m > 1:
            raise ValueError("fuzzification coefficient m must exceed 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        sched = self.cluster_schedule
        if isinstance(sched, (list, tuple)):
            if len(sched) != self.L:
                raise ValueError("cluster_schedule needs one entry per layer")
            if any(int(c) < 2 for c in sched):
                raise ValueError("every layer needs at least 2 clusters")
            object.__setattr__(self, "cluster_schedule", tuple(int(c) for c in sched))
        elif not 0 < float(sched) < 1:
            raise ValueError("cluster ratio must lie in (0, 1)")

    def clusters_for(self, layer: int, rows: int) -> int:
        """Cluster count for 0-based ``layer`` given ``rows`` input samples."""
        sched = self.cluster_schedule
        if isinstance(sched, tuple):
            c = sched[layer]
        else:
            c = max(2, math.ceil(float(sched) * rows))
        if c > rows:
            raise ValueError(f"layer {layer + 1} asks for {c} clusters from {rows} rows")
        return c


@dataclass(frozen=True)
class EnvelopeSet:
    samples: np.ndarray
    source_indices: np.ndarray  # (n, K+1): own index (or -1 for queries), then neighbors


@dataclass
class LayerState:
    layer_index: int
    prototypes: np.ndarray
    membership: np.ndarray
    objective_traces: list  # one FCM objective trace per group
    prototype_groups: Optional[np.ndarray] = None
    input_groups: Optional[np.ndarray] = None
    aligned: Optional[np.ndarray] = None
    alignment: object = None

    @property
    def output(self) -> np.ndarray:
        return self.prototypes if self.aligned is None else self.aligned


def knn(reference, query, K: int, exclude_self: Optional[int] = None) -> np.ndarray:
    """Indices of the K rows of ``reference`` nearest to ``query``.

    Sorted by distance, ties broken by smaller index. ``exclude_self`` is the
    index of the query inside ``reference`` (skipped), or None.
    """
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    query = np.asarray(query, dtype=float).reshape(1, -1)
    d2 = _kernels.sq_dists(query, reference)[0]
    order = np.argsort(d2, kind="stable")
    if exclude_self is not None:
        order = order[order != exclude_self]
    if K > len(order):
        raise ValueError(f"K={K} exceeds the {len(order)} available reference rows")
    return order[:K]


def _neighbor_table(reference, query, K, exclude_self):
    reference = np.asarray(reference, dtype=float)
    query = np.asarray(query, dtype=float)
    available = len(reference) - (1 if exclude_self else 0)
    if K > available:
        raise ValueError(f"K={K} exceeds the {available} available reference rows")
    d2 = _kernels.sq_dists(query, reference)
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    # stable sort keeps smaller index first among equal distances
    return np.argsort(d2, axis=1, kind="stable")[:, :K]


def snc(X, K: int) -> EnvelopeSet:
    """Envelope every row of ``X`` with its K nearest other rows."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    if K > 0 and n <= K:
        raise ValueError(f"need more than K={K} rows, got {n}")
    nbrs = _neighbor_table(X, X, K, exclude_self=True) if K else np.empty((n, 0), int)
    samples = np.hstack([X] + [X[nbrs[:, k]] for k in range(K)])
    return EnvelopeSet(samples, np.hstack([np.arange(n)[:, None], nbrs]))


def snc_transform(train_X, query_X, K: int) -> EnvelopeSet:
    """Envelope query rows with their K nearest training rows (no exclusion)."""
    train_X = np.asarray(train_X, dtype=float)
    query_X = np.atleast_2d(np.asarray(query_X, dtype=float))
    if query_X.shape[1] != train_X.shape[1]:
        raise ValueError("query and training feature counts differ")
    nbrs = _neighbor_table(train_X, query_X, K, exclude_self=False) if K else \
        np.empty((len(query_X), 0), int)
    samples = np.hstack([query_X] + [train_X[nbrs[:, k]] for k in range(K)])
    own = np.full((len(query_X), 1), -1)
    return EnvelopeSet(samples, np.hstack([own, nbrs]))


def init_membership(c: int, n: int, rng: np.random.Generator) -> np.ndarray:
    U = rng.uniform(0.0, 1.0, size=(c, n)) + 1e-12
    return U / U.sum(axis=0)


def fcm(X, c: int, cfg: DsenConfig = DsenConfig(), seed: int = 0,
        U0: Optional[np.ndarray] = None):
    """Fuzzy C-means on rows of ``X``.

    Returns ``(U, V, trace)`` with ``U`` the (c x n) membership matrix, ``V``
    the (c x p) prototypes and ``trace`` the objective after every sweep.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if not np.isfinite(X).all():
        raise ValueError("fcm input contains non-finite values")
    if not 1 <= c <= n:
        raise ValueError(f"cluster count {c} must lie in [1, {n}]")
    if U0 is None:
        U0 = init_membership(c, n, np.random.default_rng(seed))
    return _kernels.fcm_iterate(X, U0, cfg.m, cfg.epsilon, cfg.max_iter)


AlignHook = Callable[[int, np.ndarray, np.ndarray, "LayerState"], tuple]


def mifcm(X_e, cfg: DsenConfig = DsenConfig(), seed: int = 0,
          align: Optional[AlignHook] = None,
          groups: Optional[Sequence[int]] = None) -> list[LayerState]:
    """Layered FCM over an envelope set.

    With ``groups`` (e.g. class labels) every layer clusters each group
    separately using the same schedule, and prototypes inherit the group.
    The membership matrix is then block diagonal across groups.

    ``align(layer, inputs, input_groups, state)`` may return
    ``(aligned_prototypes, model)``; the aligned prototypes feed the next
    layer instead of the raw ones.
    """
    X = X_e.samples if isinstance(X_e, EnvelopeSet) else np.asarray(X_e, dtype=float)
    g = np.zeros(len(X), dtype=int) if groups is None else np.asarray(groups, dtype=int)
    layers = []
    inputs, in_groups = X, g
    for layer in range(cfg.L):
        protos, proto_groups, traces = [], [], []
        blocks = []
        for grp in np.unique(in_groups):
            rows = np.flatnonzero(in_groups == grp)
            c = cfg.clusters_for(layer, len(rows))
            # layer 0 / first group reuses ``seed`` so L=1 matches a plain fcm call
            Ug, Vg, tr = fcm(inputs[rows], c, cfg, seed=seed + 7919 * layer + 104729 * int(grp))
            protos.append(Vg)
            proto_groups.append(np.full(c, grp))
            traces.append(tr)
            blocks.append((rows, Ug))
        V = np.vstack(protos)
        U = np.zeros((len(V), len(inputs)))
        start = 0
        for rows, Ug in blocks:
            U[start:start + len(Ug)][:, rows] = Ug
            start += len(Ug)
        state = LayerState(layer + 1, V, U, traces, np.concatenate(proto_groups), in_groups)
        if align is not None:
            aligned, model = align(layer, inputs, in_groups, state)
            state.aligned = np.asarray(aligned, dtype=float)
            state.alignment = model
        layers.append(state)
        inputs, in_groups = state.output, state.prototype_groups
    return layers
