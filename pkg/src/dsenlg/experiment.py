"""Repeated cross-validation experiments and their report bundles.

A bundle is one directory per configuration hash::

    runs.csv          one row per (dataset, method, repeat, fold), no timings
    means.csv         per-dataset means of every metric
    runs.json         the same records plus wall-clock seconds and errors
    manifest.json     resolved configuration and every task seed
    predictions/      per-classifier test votes, consumed by the kappa report

Everything numeric in the CSV files depends only on the configuration, so a
rerun from a manifest reproduces them byte for byte.
"""
from __future__ import annotations

import ast
import configparser
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, ensemble, evaluation
from ._kernels import BACKEND
from .dataset import Dataset, load_dataset, stratified_splits
from .dsen import DsenConfig
from .ensemble import ABLATION_MODES, PipelineConfig
from .lgscm import LGSCMParams
from .tree import TreeParams

log = logging.getLogger(__name__)

METHOD_LABELS = {"full": "DSEN-LG", "mifcm_only": "MIFCM", "none": "Bagging+None"}
CSV_FIELDS = ("dataset", "method", "repeat", "fold", "seed", "status",
              "TP", "FP", "TN", "FN", "auc", "f_measure", "g_mean", "mcc",
              "sen", "spe", "pre", "rec", "n_classifiers")
PIPELINE_SECTIONS = {"dsen": DsenConfig, "lgscm": LGSCMParams, "tree": TreeParams}


class ConfigError(ValueError):
    pass


def default_data_dir() -> str:
    return os.environ.get("DSENLG_DATA", "data/keel")


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple = ("ecoli1", "ecoli3", "yeast5")
    data_dir: str = field(default_factory=default_data_dir)
    folds: int = 5
    repeats: int = 10
    seed: int = 0
    output: str = "results"
    methods: tuple = ABLATION_MODES
    workers: int = 1
    keep_predictions: bool = True
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("no datasets given")
        bad = [m for m in self.methods if m not in ABLATION_MODES]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {ABLATION_MODES}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods listed twice")
        if self.folds < 2 or self.repeats < 1 or self.workers < 1:
            raise ConfigError("need folds >= 2, repeats >= 1, workers >= 1")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["datasets"] = list(self.datasets)
        d["methods"] = list(self.methods)
        d["pipeline"] = self.pipeline.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["datasets"] = tuple(d.get("datasets", cls.datasets))
        d["methods"] = tuple(d.get("methods", cls.methods))
        if "pipeline" in d:
            d["pipeline"] = PipelineConfig.from_dict(d["pipeline"])
        return cls(**d)

    def config_hash(self) -> str:
        """Hash of everything that can change a result (not output or workers)."""
        d = self.to_dict()
        for k in ("output", "workers", "data_dir"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def bundle_dir(self) -> Path:
        return Path(self.output) / self.config_hash()

    def dataset_path(self, name: str) -> Path:
        p = Path(name)
        if p.suffix and p.exists():
            return p
        return Path(self.data_dir) / f"{name}.dat"


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _split_list(value) -> tuple:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return tuple(value)


def build_config(flags: dict | None = None, config_file: str | None = None) -> ExperimentConfig:
    """Resolve defaults, then command-line flags, then the config file on top.

    ``flags`` maps experiment field names (and ``"section.key"`` pipeline
    overrides) to values; ``None`` entries count as not given.
    """
    top: dict = {}
    sections: dict = {s: {} for s in PIPELINE_SECTIONS}
    sections["pipeline"] = {}

    def absorb(key, value):
        if "." in key:
            sec, _, name = key.partition(".")
            if sec not in sections:
                raise ConfigError(f"unknown config section {sec!r}")
            sections[sec][name] = value
        else:
            top[key] = value

    for k, v in (flags or {}).items():
        if v is not None:
            absorb(k, v)
    if config_file:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(config_file):
            raise ConfigError(f"cannot read config file {config_file}")
        for sec in parser.sections():
            for key, raw in parser.items(sec):
                absorb(key if sec == "experiment" else f"{sec}.{key}", _parse_value(raw))

    known = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"pipeline"}
    unknown = set(top) - known
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    for key in ("datasets", "methods"):
        if key in top:
            top[key] = _split_list(top[key])
    for key in ("data_dir", "output"):
        if key in top:
            top[key] = str(top[key])

    # one K drives both the envelope and the affinity graph unless set apart
    if "K" in sections["dsen"] and "K" not in sections["lgscm"]:
        sections["lgscm"]["K"] = sections["dsen"]["K"]
    try:
        parts = {s: cls(**sections[s]) for s, cls in PIPELINE_SECTIONS.items()}
        pipeline = PipelineConfig(parts["dsen"], parts["lgscm"], parts["tree"],
                                  **sections["pipeline"])
        return ExperimentConfig(pipeline=pipeline, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _hash_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def task_seed(master: int, dataset: str, method: str, repeat: int, fold: int) -> int:
    return _hash_seed(master, dataset, method, repeat, fold)


def split_seed(master: int, dataset: str) -> int:
    return _hash_seed(master, dataset, "splits")


def load_all(cfg: ExperimentConfig) -> dict:
    """Load every dataset up front; any failure aborts before a single fit."""
    out = {}
    for name in cfg.datasets:
        path = cfg.dataset_path(name)
        try:
            ds = load_dataset(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load dataset {name!r} from {path}: {exc}") from None
        if ds.name in out:
            raise ConfigError(f"dataset {ds.name!r} listed twice")
        out[ds.name] = ds
    return out


@dataclass
class RunRecord:
    dataset: str
    method: str
    repeat: int
    fold: int
    seed: int
    status: str = "ok"
    confusion: evaluation.Confusion | None = None
    metrics: evaluation.MetricSet | None = None
    n_classifiers: int = 0
    seconds: float = 0.0
    error: str = ""

    @property
    def key(self):
        return (self.dataset, self.method, self.repeat, self.fold)

    def csv_row(self) -> dict:
        row = {"dataset": self.dataset, "method": self.method, "repeat": self.repeat,
               "fold": self.fold, "seed": self.seed, "status": self.status,
               "n_classifiers": self.n_classifiers}
        if self.confusion is not None:
            row.update(dataclasses.asdict(self.confusion))
            row.update({k: repr(float(v)) for k, v in self.metrics.as_dict().items()})
        return row

    def to_json(self) -> dict:
        d = self.csv_row()
        d.update(seconds=self.seconds, error=self.error)
        return d


def _run_task(ds: Dataset, method: str, pipeline: PipelineConfig, repeat: int, fold: int,
              train_idx, test_idx, seed: int, keep_predictions: bool):
    rec = RunRecord(ds.name, method, repeat, fold, seed)
    t0 = time.perf_counter()
    pred = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = ensemble.fit(ds.subset(train_idx), pipeline.with_mode(method), seed=seed)
            votes = ensemble.classifier_votes(model, ds.features[test_idx])
        labels, _ = ensemble.fuse_votes(votes)
        y_true = ds.labels[test_idx]
        rec.confusion = evaluation.confusion(y_true, labels)
        rec.metrics = evaluation.metrics(rec.confusion)
        rec.n_classifiers = len(votes)
        if keep_predictions:
            pred = {
                "repeat": repeat, "fold": fold,
                "test_indices": [int(i) for i in test_idx],
                "y_true": "".join(map(str, y_true.tolist())),
                "classifiers": [f"{q}:{layer}" for q, layer in model.classifier_keys()],
                "votes": ["".join(map(str, v.tolist())) for v in votes],
            }
    except Exception as exc:  # a failed fold is recorded, the run continues
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
    rec.seconds = time.perf_counter() - t0
    return rec, pred


def plan_tasks(cfg: ExperimentConfig, data: dict) -> list:
    tasks = []
    for name, ds in data.items():
        splits = stratified_splits(ds, cfg.folds, cfg.repeats, seed=split_seed(cfg.seed, name))
        for method, sp in itertools.product(cfg.methods, splits):
            seed = task_seed(cfg.seed, name, method, sp.repeat_index, sp.fold_index)
            tasks.append((ds, method, cfg.pipeline, sp.repeat_index, sp.fold_index,
                          sp.train_indices, sp.test_indices, seed, cfg.keep_predictions))
    return tasks


def _csv_text(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def mean_table(records) -> list[dict]:
    """Per (dataset, method) arithmetic means over successful runs."""
    groups: dict = {}
    for r in records:
        if r.status == "ok":
            groups.setdefault((r.dataset, r.method), []).append(r.metrics)
    rows = []
    for (name, method), ms in groups.items():
        row = {"dataset": name, "method": method, "label": METHOD_LABELS[method], "runs": len(ms)}
        for metric in evaluation.METRIC_NAMES:
            row[metric] = repr(sum(getattr(m, metric) for m in ms) / len(ms))
        rows.append(row)
    return rows


@dataclass
class Report:
    directory: Path
    records: list
    failures: int

    @property
    def ok(self) -> bool:
        return self.failures == 0


def run_experiment(cfg: ExperimentConfig, directory: Path | None = None) -> Report:
    data = load_all(cfg)
    tasks = plan_tasks(cfg, data)
    out = Path(directory) if directory is not None else cfg.bundle_dir()
    out.mkdir(parents=True, exist_ok=True)
    log.info("%d tasks -> %s (backend %s)", len(tasks), out, BACKEND)

    results = {}
    if cfg.workers == 1:
        for i, t in enumerate(tasks, 1):
            rec, pred = _run_task(*t)
            results[rec.key] = (rec, pred)
            log.debug("[%d/%d] %s %s", i, len(tasks), rec.key, rec.status)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_task, *t) for t in tasks]
            for fut in as_completed(futures):
                rec, pred = fut.result()
                results[rec.key] = (rec, pred)

    order = {name: i for i, name in enumerate(data)}
    morder = {m: i for i, m in enumerate(cfg.methods)}
    keys = sorted(results, key=lambda k: (order[k[0]], morder[k[1]], k[2], k[3]))
    records = [results[k][0] for k in keys]
    failures = sum(r.status != "ok" for r in records)
    for r in records:
        if r.status != "ok":
            log.error("run %s failed: %s", r.key, r.error.splitlines()[0])

    (out / "runs.csv").write_text(_csv_text([r.csv_row() for r in records], CSV_FIELDS))
    (out / "means.csv").write_text(_csv_text(
        mean_table(records), ("dataset", "method", "label", "runs") + evaluation.METRIC_NAMES))
    (out / "runs.json").write_text(json.dumps([r.to_json() for r in records], indent=1))
    manifest = {
        "format": "dsenlg-experiment",
        "version": __version__,
        "backend": BACKEND,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "split_seeds": {name: split_seed(cfg.seed, name) for name in data},
        "task_seeds": [[r.dataset, r.method, r.repeat, r.fold, r.seed] for r in records],
        "scheduled": len(tasks),
        "failed": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    if cfg.keep_predictions:
        pdir = out / "predictions"
        pdir.mkdir(exist_ok=True)
        for name, method in itertools.product(data, cfg.methods):
            lines = [json.dumps(results[k][1]) for k in keys
                     if k[:2] == (name, method) and results[k][1] is not None]
            (pdir / f"{name}__{method}.jsonl").write_text("\n".join(lines) + "\n")
    return Report(out, records, failures)


def config_from_manifest(path) -> ExperimentConfig:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("format") != "dsenlg-experiment":
        raise ConfigError(f"{path} is not an experiment manifest")
    return ExperimentConfig.from_dict(manifest["config"])


def read_means(directory) -> list[dict]:
    path = Path(directory) / "means.csv"
    if not path.exists():
        raise ConfigError(f"no means.csv in {directory}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def score_matrix(rows, metric: str):
    """(methods, datasets, methods x datasets matrix) from mean-table rows."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    names = list(dict.fromkeys(r["dataset"] for r in rows))
    M = np.full((len(methods), len(names)), np.nan)
    for r in rows:
        M[methods.index(r["method"]), names.index(r["dataset"])] = float(r[metric])
    if np.isnan(M).any():
        raise ConfigError(f"missing (method, dataset) cells for {metric}")
    return methods, names, M


def compute_stats(directory, control: str = "full", alpha: float = 0.05) -> dict:
    """Average ranks, Friedman test and Holm comparisons against ``control``.

    Writes ``ranks.csv`` and ``stats.json`` into the bundle and returns the
    same content.
    """
    rows = read_means(directory)
    out = {"control": control, "alpha": alpha, "metrics": {}}
    rank_rows = []
    for metric in evaluation.METRIC_NAMES:
        methods, names, M = score_matrix(rows, metric)
        if len(methods) < 2 or len(names) < 2:
            raise ConfigError("stats needs at least 2 methods and 2 datasets")
        if control not in methods:
            raise ConfigError(f"control method {control!r} is not in the bundle")
        ranks = evaluation.average_ranks(M)
        stat, p = evaluation.friedman_test(ranks, len(methods), len(names))
        ci = methods.index(control)
        pz = evaluation.rank_z_pvalues(ranks, ci, len(names))
        others = [i for i in range(len(methods)) if i != ci]
        holm = evaluation.holm_test(pz[others], alpha)
        out["metrics"][metric] = {
            "friedman": {"statistic": stat, "p_value": p, "df": len(methods) - 1},
            "average_ranks": dict(zip(methods, ranks.tolist())),
            "holm": [{"method": methods[others[h.index]], "p_value": h.p_value,
                      "threshold": h.threshold, "reject": h.reject} for h in holm],
        }
        for m, r in zip(methods, ranks):
            rank_rows.append({"metric": metric, "method": m, "average_rank": repr(float(r))})
    d = Path(directory)
    (d / "ranks.csv").write_text(_csv_text(rank_rows, ("metric", "method", "average_rank")))
    (d / "stats.json").write_text(json.dumps(out, indent=1))
    return out


KAPPA_FIELDS = ("repeat", "fold", "classifier_a", "classifier_b", "kappa") + evaluation.METRIC_NAMES


def kappa_pairs(y_true, votes, names) -> list[dict]:
    """One row per unordered classifier pair: kappa and pair-mean metrics."""
    y = np.asarray(y_true)
    V = np.asarray(votes)
    scores = [evaluation.evaluate(y, v) for v in V]
    rows = []
    for a, b in itertools.combinations(range(len(V)), 2):
        row = {"classifier_a": names[a], "classifier_b": names[b],
               "kappa": evaluation.cohen_kappa(V[a], V[b])}
        for metric in evaluation.METRIC_NAMES:
            row[metric] = (getattr(scores[a], metric) + getattr(scores[b], metric)) / 2
        rows.append(row)
    return rows


def _bits(s: str) -> np.ndarray:
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def kappa_report(directory, dataset: str, method: str) -> list[dict]:
    """Diversity scatter data for one (dataset, method); one row per pair per fold."""
    path = Path(directory) / "predictions" / f"{dataset}__{method}.jsonl"
    if not path.exists():
        raise ConfigError(f"no stored per-classifier predictions for {dataset}/{method}")
    rows = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        votes = np.vstack([_bits(v) for v in rec["votes"]])
        for row in kappa_pairs(_bits(rec["y_true"]), votes, rec["classifiers"]):
            row.update(repeat=rec["repeat"], fold=rec["fold"])
            rows.append(row)
    text_rows = [{k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()}
                 for r in rows]
    (Path(directory) / f"kappa__{dataset}__{method}.csv").write_text(
        _csv_text(text_rows, KAPPA_FIELDS))
    return rows


def describe_datasets(data_dir) -> list[dict]:
    out = []
    for path in sorted(Path(data_dir).glob("*.dat")):
        try:
            ds = load_dataset(path)
        except (OSError, ValueError) as exc:
            out.append({"name": path.stem, "error": str(exc)})
            continue
        out.append({"name": ds.name, "samples": ds.n_samples, "features": ds.n_features,
                    "minority": ds.n_minority, "majority": ds.n_majority,
                    "ir": ds.n_majority / ds.n_minority})
    return out
