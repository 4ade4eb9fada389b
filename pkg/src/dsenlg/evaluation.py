"""Confusion-matrix metrics, classifier diversity and rank statistics.

The minority class is the positive class throughout. AUC here is the
two-point balanced form ``(sen + spe) / 2`` computed from hard labels, not
the area under a threshold sweep.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import MINORITY


@dataclass(frozen=True)
class Confusion:
    TP: int
    FP: int
    TN: int
    FN: int

    def __post_init__(self):
        if min(self.TP, self.FP, self.TN, self.FN) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN


@dataclass(frozen=True)
class MetricSet:
    auc: float
    f_measure: float
    g_mean: float
    mcc: float
    sen: float
    spe: float
    pre: float
    rec: float

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = ("auc", "f_measure", "g_mean", "mcc")


def confusion(y_true, y_pred) -> Confusion:
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    t = y_true == MINORITY
    p = y_pred == MINORITY
    return Confusion(int(np.sum(t & p)), int(np.sum(~t & p)),
                     int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


def _ratio(num, den):
    return num / den if den else 0.0


def metrics(c: Confusion) -> MetricSet:
    """All eight scores from one confusion matrix.

    Zero denominators give 0 (precision, F-measure, MCC, and sen/spe for an
    absent class).
    """
    sen = _ratio(c.TP, c.TP + c.FN)
    spe = _ratio(c.TN, c.TN + c.FP)
    pre = _ratio(c.TP, c.TP + c.FP)
    rec = sen
    f = _ratio(2 * pre * rec, pre + rec)
    den = (c.TP + c.FP) * (c.TP + c.FN) * (c.TN + c.FP) * (c.TN + c.FN)
    mcc = (c.TP * c.TN - c.FP * c.FN) / math.sqrt(den) if den else 0.0
    return MetricSet((sen + spe) / 2, f, math.sqrt(sen * spe), mcc, sen, spe, pre, rec)


def evaluate(y_true, y_pred) -> MetricSet:
    return metrics(confusion(y_true, y_pred))


def cohen_kappa(pred_a, pred_b) -> float:
    """Chance-corrected agreement of two label vectors (1.0 when chance agreement is 1)."""
    a = np.asarray(pred_a).ravel()
    b = np.asarray(pred_b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    n = a.size
    if n == 0:
        raise ValueError("empty prediction vectors")
    p_o = float(np.mean(a == b))
    labels = np.union1d(a, b)
    p_e = float(sum(np.mean(a == v) * np.mean(b == v) for v in labels))
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def rank_rows(results, higher_is_better: bool = True) -> np.ndarray:
    """Per-dataset ranks (rank 1 = best, ties share the mean rank).

    ``results`` is methods x datasets; the output has the same shape.
    """
    R = np.asarray(results, dtype=float)
    if R.ndim != 2:
        raise ValueError("results must be a methods x datasets matrix")
    if not np.isfinite(R).all():
        raise ValueError("results contain missing cells")
    scores = -R if higher_is_better else R
    ranks = np.empty_like(scores)
    for j in range(scores.shape[1]):
        col = scores[:, j]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        i = 0
        while i < len(order):
            k = i
            while k + 1 < len(order) and sorted_vals[k + 1] == sorted_vals[i]:
                k += 1
            ranks[order[i:k + 1], j] = (i + k) / 2.0 + 1.0
            i = k + 1
    return ranks


def average_ranks(results, higher_is_better: bool = True) -> np.ndarray:
    return rank_rows(results, higher_is_better).mean(axis=1)


def _gammainc_upper_regularized(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a), via series (x < a + 1) or Lentz continued fraction."""
    if x < 0 or a <= 0:
        raise ValueError("invalid arguments for the incomplete gamma function")
    if x == 0:
        return 1.0
    lead = math.exp(-x + a * math.log(x) - math.lgamma(a))
    if x < a + 1.0:
        term = total = 1.0 / a
        ap = a
        for _ in range(10000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return max(0.0, 1.0 - total * lead)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return lead * h


def chi2_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return _gammainc_upper_regularized(df / 2.0, x / 2.0)


def friedman_test(avg_ranks, k: int | None = None, N: int | None = None):
    """Friedman chi-square from per-method average ranks over ``N`` datasets.

    Returns ``(statistic, p_value)`` with ``k - 1`` degrees of freedom.
    """
    R = np.asarray(avg_ranks, dtype=float)
    k = len(R) if k is None else k
    if N is None:
        raise ValueError("the number of datasets N is required")
    if k < 2 or N < 2 or len(R) != k:
        raise ValueError("need k >= 2 methods (matching the ranks) and N >= 2 datasets")
    stat = 12.0 * N / (k * (k + 1)) * (float(np.sum(R * R)) - k * (k + 1) ** 2 / 4.0)
    stat = max(stat, 0.0)
    return stat, chi2_sf(stat, k - 1)


@dataclass(frozen=True)
class HolmResult:
    index: int  # position in the caller's p-value list
    p_value: float
    threshold: float
    reject: bool


def holm_test(p_values, alpha: float = 0.05) -> list[HolmResult]:
    """Holm step-down procedure; results come back in ascending p order."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    p = np.asarray(p_values, dtype=float)
    if ((p < 0) | (p > 1)).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    out = []
    still = True
    for i, idx in enumerate(order):
        thr = alpha / (m - i)
        still = still and bool(p[idx] < thr)
        out.append(HolmResult(int(idx), float(p[idx]), thr, still))
    return out


def rank_z_pvalues(avg_ranks, control: int, N: int) -> np.ndarray:
    """Two-sided p-values of every method's rank difference to ``control``.

    Uses ``z = (R_i - R_control) / sqrt(k (k + 1) / (6 N))``; the control's
    own entry is NaN.
    """
    R = np.asarray(avg_ranks, dtype=float)
    k = len(R)
    se = math.sqrt(k * (k + 1) / (6.0 * N))
    z = (R - R[control]) / se
    p = np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])
    p[control] = np.nan
    return p
