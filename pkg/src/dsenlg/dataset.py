"""Dataset ingestion, imbalance bookkeeping and repeated stratified splits.

Labels are stored as a boolean-like integer vector where ``1`` marks the
minority (positive) class and ``0`` the majority class.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MINORITY = 1
MAJORITY = 0


class DatasetError(ValueError):
    """Raised for unreadable or invalid dataset files."""


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    minority_label: str = "positive"
    majority_label: str = "negative"
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int8)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        n, s = X.shape
        if n < 2 or s < 1:
            raise DatasetError(f"need n >= 2 and s >= 1, got n={n}, s={s}")
        if y.shape != (n,):
            raise DatasetError("labels length does not match feature rows")
        if not np.isin(y, (MINORITY, MAJORITY)).all():
            raise DatasetError("labels must be 0 (majority) or 1 (minority)")
        if not np.isfinite(X).all():
            bad = int(np.flatnonzero(~np.isfinite(X).all(axis=1))[0])
            raise DatasetError(f"non-finite feature value in row {bad}")
        n_min = int(y.sum())
        if n_min < 1 or n_min == n:
            raise DatasetError("dataset must contain both classes")
        if n - n_min < n_min:
            raise DatasetError("minority class outnumbers the majority class")
        if len(self.feature_names) != s:
            raise DatasetError("feature_names length does not match columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_minority(self) -> int:
        return int(self.labels.sum())

    @property
    def n_majority(self) -> int:
        return self.n_samples - self.n_minority

    def subset(self, indices: Sequence[int], name: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            name or self.name,
            self.features[idx],
            self.labels[idx],
            self.feature_names,
            self.minority_label,
            self.majority_label,
            self.source,
        )


def _encode(raw_labels: list[str], minority: str | None, where: str):
    values, counts = np.unique(np.asarray(raw_labels), return_counts=True)
    if minority is None:
        if len(values) != 2:
            raise DatasetError(
                f"{where}: expected exactly two classes, found {len(values)}"
            )
        # np.unique sorts lexicographically, so a stable argmin breaks ties
        # toward the smaller label
        minority = str(values[int(np.argmin(counts))])
        majority = str(values[1 - int(np.argmin(counts))])
    else:
        if minority not in values:
            raise DatasetError(f"{where}: minority label {minority!r} not present")
        others = [str(v) for v in values if v != minority]
        if not others:
            raise DatasetError(f"{where}: data contains a single class")
        majority = others[0] if len(others) == 1 else "rest"
    y = np.array([1 if lab == minority else 0 for lab in raw_labels], dtype=np.int8)
    return y, minority, majority


def _parse_row(cells: list[str], row_no: int, where: str) -> list[float]:
    out = []
    for cell in cells:
        cell = cell.strip()
        if cell in ("?", ""):
            raise DatasetError(f"{where}: missing value in data row {row_no}")
        try:
            out.append(float(cell))
        except ValueError:
            raise DatasetError(
                f"{where}: non-numeric feature value {cell!r} in data row {row_no}"
            ) from None
    return out


def load_keel(path: str | Path) -> Dataset:
    """Read a binary KEEL ``.dat`` file.

    The class attribute is the one named by ``@outputs`` (or ``@output``),
    falling back to the last ``@attribute``. The rarer class becomes the
    minority; on equal counts the lexicographically smaller label wins.
    Errors name the offending data row (0-based within ``@data``).
    """
    path = Path(path)
    where = path.name
    if not path.exists():
        raise DatasetError(f"{where}: file not found")
    attributes: list[str] = []
    output_name = None
    relation = path.stem
    rows: list[list[str]] = []
    in_data = False
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            if not in_data:
                if not line.startswith("@"):
                    raise DatasetError(f"{where}: malformed header line {line!r}")
                key, _, rest = line.partition(" ")
                key = key.lower()
                if key == "@relation":
                    relation = rest.strip() or relation
                elif key == "@attribute":
                    name = rest.strip().split()[0] if rest.strip() else ""
                    # handle "Name real[0,1]" and "Name{a,b}"
                    name = name.split("{")[0].split("[")[0]
                    if not name:
                        raise DatasetError(f"{where}: malformed @attribute line")
                    attributes.append(name)
                elif key in ("@outputs", "@output"):
                    output_name = rest.strip().split(",")[0].strip()
                elif key == "@data":
                    in_data = True
                continue
            rows.append([c.strip() for c in line.split(",")])
    if not in_data:
        raise DatasetError(f"{where}: missing @data section")
    if len(attributes) < 2:
        raise DatasetError(f"{where}: need at least one feature and a class attribute")
    class_pos = attributes.index(output_name) if output_name in attributes else len(attributes) - 1
    feature_names = [a for i, a in enumerate(attributes) if i != class_pos]
    feats, raw_labels = [], []
    for i, cells in enumerate(rows):
        if len(cells) != len(attributes):
            raise DatasetError(
                f"{where}: data row {i} has {len(cells)} fields, expected {len(attributes)}"
            )
        label = cells[class_pos]
        if label in ("?", ""):
            raise DatasetError(f"{where}: missing class label in data row {i}")
        feats.append(_parse_row(cells[:class_pos] + cells[class_pos + 1:], i, where))
        raw_labels.append(label)
    if not rows:
        raise DatasetError(f"{where}: empty data section")
    y, mino, majo = _encode(raw_labels, None, where)
    return Dataset(relation, np.array(feats, dtype=float), y, feature_names, mino, majo, str(path))


def write_keel(ds: Dataset, path: str | Path) -> None:
    """Serialize ``ds`` back to KEEL format (real-valued attributes only)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"@relation {ds.name}\n")
        for j, name in enumerate(ds.feature_names):
            col = ds.features[:, j]
            fh.write(f"@attribute {name} real [{col.min()!r}, {col.max()!r}]\n")
        fh.write(f"@attribute Class {{{ds.minority_label}, {ds.majority_label}}}\n")
        fh.write(f"@inputs {', '.join(ds.feature_names)}\n@outputs Class\n@data\n")
        for row, lab in zip(ds.features, ds.labels):
            tag = ds.minority_label if lab == MINORITY else ds.majority_label
            fh.write(", ".join(repr(float(v)) for v in row) + f", {tag}\n")


def load_csv(path: str | Path, label_column: str | int, minority_label: str,
             header: bool | None = None) -> Dataset:
    """Read a CSV file; every non-label column must be numeric.

    ``header`` defaults to True when ``label_column`` is a name and False
    when it is an integer index.
    """
    path = Path(path)
    where = path.name
    if header is None:
        header = not isinstance(label_column, int)
    with path.open(newline="") as fh:
        table = [r for r in csv.reader(fh) if r]
    if header:
        names, table = [c.strip() for c in table[0]], table[1:]
    else:
        names = [f"x{j}" for j in range(len(table[0]))] if table else []
    if isinstance(label_column, int):
        if not 0 <= label_column < len(names):
            raise DatasetError(f"{where}: label column index {label_column} out of range")
        col = label_column
    else:
        if label_column not in names:
            raise DatasetError(f"{where}: unknown label column {label_column!r}")
        col = names.index(label_column)
    feats, raw_labels = [], []
    for i, cells in enumerate(table):
        if len(cells) != len(names):
            raise DatasetError(f"{where}: data row {i} has {len(cells)} fields")
        raw_labels.append(cells[col].strip())
        feats.append(_parse_row(cells[:col] + cells[col + 1:], i, where))
    y, mino, majo = _encode(raw_labels, str(minority_label), where)
    feature_names = [nm for j, nm in enumerate(names) if j != col]
    return Dataset(path.stem, np.array(feats, dtype=float), y, feature_names, mino, majo, str(path))


def load_dataset(path: str | Path, **csv_options) -> Dataset:
    path = Path(path)
    if path.suffix.lower() == ".dat":
        return load_keel(path)
    return load_csv(path, **csv_options)


def imbalance_ratio(ds: Dataset) -> float:
    """Majority count over minority count."""
    return ds.n_majority / ds.n_minority


@dataclass(frozen=True)
class CVSplit:
    repeat_index: int
    fold_index: int
    train_indices: np.ndarray
    test_indices: np.ndarray


def stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Assign a fold id to every sample, class by class.

    Each class is shuffled and dealt round-robin, so per-class counts per fold
    differ by at most one. The dealing offset rotates between classes to keep
    total fold sizes level.
    """
    labels = np.asarray(labels)
    assignment = np.empty(len(labels), dtype=int)
    offset = 0
    for cls in (MINORITY, MAJORITY):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < folds:
            raise DatasetError(
                f"class {cls} has {len(idx)} samples, fewer than {folds} folds"
            )
        idx = rng.permutation(idx)
        assignment[idx] = (np.arange(len(idx)) + offset) % folds
        offset = (offset + len(idx)) % folds
    return assignment


def stratified_splits(ds: Dataset, folds: int = 5, repeats: int = 10,
                      seed: int = 0) -> list[CVSplit]:
    if folds < 2:
        raise DatasetError("folds must be >= 2")
    out = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        fold_of = stratified_folds(ds.labels, folds, rng)
        for f in range(folds):
            out.append(CVSplit(r, f, np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return out


class Standardizer:
    """Z-score scaler fit on training rows; constant features map to 0."""

    def __init__(self, mean: np.ndarray, inv_scale: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.inv_scale = np.asarray(inv_scale, dtype=float)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        inv = np.zeros_like(std)
        inv[~const] = 1.0 / std[~const]
        return cls(mean, inv)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) * self.inv_scale
