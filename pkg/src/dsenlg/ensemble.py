"""The full imbalanced-ensemble pipeline.

Training, per balanced subset:

    standardized subset rows --envelope--> X_e  (n x (K+1)s)
    per class FCM -> prototypes; joint alignment of prototypes against the
    layer input -> projected prototypes (c x d) -> next layer input
    one tree per layer on the labelled layer output

Test rows follow the same chain: envelope against the subset's training
rows, then every layer's projection in turn. Votes from all trees are pooled;
a tie goes to the minority class.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import lgscm
from .dataset import Dataset, Standardizer
from .dsen import DsenConfig, mifcm, snc, snc_transform
from .partition import divide_and_fuse
from .tree import DecisionTree, TreeParams, train_tree

log = logging.getLogger(__name__)

BUNDLE_VERSION = 1
ABLATION_MODES = ("full", "mifcm_only", "none")
VOTE_SCOPES = ("all_layers", "final_layer")


@dataclass(frozen=True)
class PipelineConfig:
    dsen: DsenConfig = field(default_factory=DsenConfig)
    lgscm: lgscm.LGSCMParams = field(default_factory=lgscm.LGSCMParams)
    tree: TreeParams = field(default_factory=TreeParams)
    vote_scope: str = "all_layers"
    ablation_mode: str = "full"
    keep_remainder: bool = False

    def __post_init__(self):
        if self.ablation_mode not in ABLATION_MODES:
            raise ValueError(f"ablation_mode must be one of {ABLATION_MODES}")
        if self.vote_scope not in VOTE_SCOPES:
            raise ValueError(f"vote_scope must be one of {VOTE_SCOPES}")
        if self.lgscm.K != self.dsen.K:
            raise ValueError("the affinity graph K must equal the envelope K")

    def to_dict(self) -> dict:
        d = asdict(self)
        sched = d["dsen"]["cluster_schedule"]
        d["dsen"]["cluster_schedule"] = list(sched) if isinstance(sched, tuple) else sched
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        dsen = dict(d.get("dsen", {}))
        if isinstance(dsen.get("cluster_schedule"), list):
            dsen["cluster_schedule"] = tuple(dsen["cluster_schedule"])
        return cls(
            DsenConfig(**dsen),
            lgscm.LGSCMParams(**d.get("lgscm", {})),
            TreeParams(**d.get("tree", {})),
            d.get("vote_scope", "all_layers"),
            d.get("ablation_mode", "full"),
            d.get("keep_remainder", False),
        )

    def with_mode(self, mode: str) -> "PipelineConfig":
        return replace(self, ablation_mode=mode)


@dataclass
class Projection:
    """Stored kernel projection of one layer (enough to map new rows)."""
    theta: np.ndarray
    X_r: np.ndarray
    sigma: float

    def __call__(self, rows) -> np.ndarray:
        return (self.theta.T @ lgscm.gaussian_gram(self.X_r, rows, self.sigma)).T

    @property
    def d(self) -> int:
        return self.theta.shape[1]


@dataclass
class SubsetModel:
    subset_index: int
    reference: Optional[np.ndarray]  # standardized training rows used for test envelopes
    projections: list  # per layer, Projection or None
    trees: dict  # layer index (0-based, or -1 for raw) -> DecisionTree
    training_sizes: dict = field(default_factory=dict)


@dataclass
class PipelineModel:
    config: PipelineConfig
    scaler: Standardizer
    subsets: list
    n_features: int

    @property
    def n_classifiers(self) -> int:
        return sum(len(s.trees) for s in self.subsets)

    def classifier_keys(self) -> list:
        return [(s.subset_index, layer) for s in self.subsets for layer in sorted(s.trees)]

    def to_dict(self) -> dict:
        subs = []
        for s in self.subsets:
            subs.append({
                "subset_index": s.subset_index,
                "reference": None if s.reference is None else s.reference.tolist(),
                "projections": [
                    None if p is None else
                    {"theta": p.theta.tolist(), "X_r": p.X_r.tolist(), "sigma": p.sigma}
                    for p in s.projections
                ],
                "trees": {str(k): t.to_dict() for k, t in s.trees.items()},
                "training_sizes": {str(k): v for k, v in s.training_sizes.items()},
            })
        return {
            "format": "dsenlg-pipeline",
            "version": BUNDLE_VERSION,
            "config": self.config.to_dict(),
            "scaler": {"mean": self.scaler.mean.tolist(),
                       "inv_scale": self.scaler.inv_scale.tolist()},
            "n_features": self.n_features,
            "subsets": subs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineModel":
        if d.get("format") != "dsenlg-pipeline" or d.get("version") != BUNDLE_VERSION:
            raise ValueError("unsupported pipeline bundle")
        subs = []
        for s in d["subsets"]:
            subs.append(SubsetModel(
                s["subset_index"],
                None if s["reference"] is None else np.asarray(s["reference"], dtype=float),
                [None if p is None else Projection(np.asarray(p["theta"], dtype=float),
                                                   np.asarray(p["X_r"], dtype=float),
                                                   float(p["sigma"]))
                 for p in s["projections"]],
                {int(k): DecisionTree.from_dict(t) for k, t in s["trees"].items()},
                {int(k): v for k, v in s.get("training_sizes", {}).items()},
            ))
        scaler = Standardizer(np.asarray(d["scaler"]["mean"]), np.asarray(d["scaler"]["inv_scale"]))
        return cls(PipelineConfig.from_dict(d["config"]), scaler, subs, int(d["n_features"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PipelineModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def subset_seed(seed: int, q: int) -> int:
    return int(np.random.SeedSequence([seed, q]).generate_state(1)[0])


def _fit_subset(X, y, q, cfg: PipelineConfig, seed: int) -> SubsetModel:
    if cfg.ablation_mode == "none":
        tree = train_tree(X, y, cfg.tree, seed)
        return SubsetModel(q, None, [], {-1: tree}, {-1: len(X)})

    K = cfg.dsen.K
    env = snc(X, K)

    hook = None
    if cfg.ablation_mode == "full":
        def hook(layer, inputs, in_groups, state):
            model = lgscm.optimize(inputs, state.prototypes, cfg.lgscm, seed,
                                   G0=state.membership)
            return model.project(state.prototypes), model

    layers = mifcm(env, cfg.dsen, seed, align=hook, groups=y)
    projections = []
    trees = {}
    sizes = {}
    keep = range(len(layers)) if cfg.vote_scope == "all_layers" else [len(layers) - 1]
    for li, state in enumerate(layers):
        if state.alignment is not None:
            a = state.alignment
            projections.append(Projection(a.theta, a.X_r, a.sigma))
        else:
            projections.append(None)
        if li in keep:
            trees[li] = train_tree(state.output, state.prototype_groups, cfg.tree, seed + li)
            sizes[li] = len(state.output)
    return SubsetModel(q, X, projections, trees, sizes)


def fit(train, cfg: PipelineConfig = PipelineConfig(), seed: int = 0,
        labels=None) -> PipelineModel:
    """Train the ensemble on a :class:`Dataset` (or a raw matrix plus ``labels``)."""
    if isinstance(train, Dataset):
        X_raw, y = train.features, train.labels
    else:
        X_raw, y = np.asarray(train, dtype=float), np.asarray(labels)
    y = np.asarray(y).astype(np.int8)
    if y.min() == y.max():
        raise ValueError("training data must contain both classes")
    subsets = divide_and_fuse(X_raw, y, keep_remainder=cfg.keep_remainder)
    scaler = Standardizer.fit(X_raw)
    Z = scaler.transform(X_raw)
    models = []
    for sub in subsets:
        rows = sub.indices
        try:
            models.append(_fit_subset(Z[rows], y[rows], sub.subset_index, cfg,
                                      subset_seed(seed, sub.subset_index)))
        except (ValueError, lgscm.DegenerateKernelError) as exc:
            warnings.warn(f"skipping subset {sub.subset_index}: {exc}")
    if not models:
        raise ValueError("every balanced subset was too small to train")
    return PipelineModel(cfg, scaler, models, X_raw.shape[1])


def classifier_votes(model: PipelineModel, X_test) -> np.ndarray:
    """(n_classifiers x n_test) 0/1 votes, ordered as ``model.classifier_keys()``."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_test.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X_test.shape[1]}")
    Z = model.scaler.transform(X_test)
    K = model.config.dsen.K
    votes = []
    for sub in model.subsets:
        if sub.reference is None:
            votes.append(sub.trees[-1].predict(Z)[0])
            continue
        rep = snc_transform(sub.reference, Z, K).samples
        assert rep.shape[1] == (K + 1) * Z.shape[1]
        for li, proj in enumerate(sub.projections):
            if proj is not None:
                rep = proj(rep)
                assert rep.shape[1] == proj.d
            if li in sub.trees:
                votes.append(sub.trees[li].predict(rep)[0])
    return np.vstack(votes).astype(np.int8)


def fuse_votes(votes: np.ndarray):
    """Pooled vote: minority share and label (ties to minority)."""
    share = np.asarray(votes, dtype=float).mean(axis=0)
    return (share >= 0.5).astype(np.int8), share


def predict(model: PipelineModel, X_test):
    """Labels and minority vote fractions for ``X_test``."""
    return fuse_votes(classifier_votes(model, X_test))
