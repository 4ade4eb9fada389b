"""Deep sample envelope network with local-global structure consistency.

An ensemble for binary imbalanced classification: balanced subsets from
division and fusion, envelope samples from nearest neighbors, layered fuzzy
C-means prototypes aligned in a kernel subspace, and decision-tree votes.
"""
from ._kernels import BACKEND
from .dataset import Dataset, load_dataset, load_keel, stratified_splits
from .ensemble import PipelineConfig, PipelineModel, fit, predict
from .evaluation import cohen_kappa, evaluate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Dataset",
    "PipelineConfig",
    "PipelineModel",
    "cohen_kappa",
    "evaluate",
    "fit",
    "load_dataset",
    "load_keel",
    "predict",
    "stratified_splits",
    "__version__",
]
