"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The experiment-level criteria share one default 5-fold x 10-repeat run (about
nine minutes on one core) plus a rerun from its manifest.
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from dsenlg import _kernels
from dsenlg import evaluation as ev
from dsenlg import experiment as ex
from dsenlg import lgscm as lg
from dsenlg.dsen import DsenConfig, fcm
from dsenlg.partition import divide_and_fuse, subset_count

from conftest import DATA_DIR

pytestmark = pytest.mark.slow

DATASETS = ("ecoli1", "ecoli3", "yeast5")
BANDS = {"ecoli1": 0.9246, "yeast5": 0.9802}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    if not DATA_DIR.is_dir():
        pytest.skip("bundled KEEL data not found")
    out = tmp_path_factory.mktemp("acceptance")
    cfg = ex.build_config({"datasets": ",".join(DATASETS), "data_dir": str(DATA_DIR),
                           "output": str(out)})
    t0 = time.perf_counter()
    report = ex.run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    assert report.ok
    means = {(r["dataset"], r["method"]): float(r["auc"]) for r in ex.read_means(report.directory)}
    return report, means, elapsed


# criterion 1

def test_ablation_direction(full_run, verdict):
    _, auc, elapsed = full_run
    margins = {d: auc[d, "full"] - max(auc[d, "none"], auc[d, "mifcm_only"]) for d in DATASETS}
    wide = sum(m >= 0.02 for m in margins.values())
    ok = all(m > 0 for m in margins.values()) and wide >= 2
    detail = " ".join(f"{d}: full={auc[d, 'full']:.4f} none={auc[d, 'none']:.4f} "
                      f"mifcm={auc[d, 'mifcm_only']:.4f} margin={margins[d]:+.4f};"
                      for d in DATASETS)
    verdict(1, ok, f"{detail} {wide}/3 margins >= 0.02; run took {elapsed:.0f}s")
    assert ok


# criterion 2

def test_absolute_band(full_run, verdict):
    _, auc, _ = full_run
    gaps = {d: auc[d, "full"] - ref for d, ref in BANDS.items()}
    ok = all(abs(g) <= 0.06 for g in gaps.values())
    verdict(2, ok, " ".join(f"{d}: {auc[d, 'full']:.4f} vs {BANDS[d]} ({gaps[d]:+.4f});"
                            for d in BANDS) + " tolerance 0.06")
    assert ok


# criterion 3

def test_fcm_correctness(verdict):
    rng = np.random.default_rng(3)
    worst_rise = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 40))
        X = rng.normal(size=(n, int(rng.integers(1, 6)))) * rng.uniform(0.1, 10)
        c = int(rng.integers(1, min(n, 8) + 1))
        _, _, trace = fcm(X, c, seed=int(rng.integers(1 << 31)))
        t = np.asarray(trace)
        if len(t) > 1:
            worst_rise = max(worst_rise, float(np.max((t[1:] - t[:-1]) / np.maximum(t[:-1], 1e-300))))
    monotone = worst_rise <= 1e-12

    mean_err = 0.0
    for _ in range(50):
        X = rng.normal(size=(int(rng.integers(2, 30)), 4))
        _, V, _ = fcm(X, 1)
        mean_err = max(mean_err, float(np.abs(V[0] - X.mean(axis=0)).max()))

    # fixed point of the membership update, at a tight stopping threshold
    tight = DsenConfig(epsilon=1e-15, max_iter=50_000)
    residual = 0.0
    for _ in range(100):
        n = int(rng.integers(6, 40))
        X = rng.normal(size=(n, 3))
        c = int(rng.integers(2, 5))
        U, V, _ = fcm(X, c, tight, seed=int(rng.integers(1 << 31)))
        U_next = _kernels.fcm_memberships(_kernels.sq_dists(V, X), tight.m)
        residual = max(residual, float(np.abs(U_next - U).max()))

    ok = monotone and mean_err <= 1e-10 and residual <= 1e-6
    verdict(3, ok, f"max relative rise {worst_rise:.1e} over 1000 traces; c=1 mean error "
                   f"{mean_err:.1e}; fixed-point residual {residual:.1e}")
    assert ok


# criterion 4

def _shifted_pair(seed):
    r = np.random.default_rng(seed)
    return r.normal(size=(40, 2)), r.normal(size=(20, 2)) + np.array([3.0, 0.0])


def _double_sum(theta, G, kern, S):
    n = S.shape[0]
    Zm = theta.T @ kern.gram_v @ G
    Ze = theta.T @ kern.gram_e
    return sum(S[h, e] * float(np.sum((Zm[:, h] - Ze[:, e]) ** 2))
               for h in range(n) for e in range(n)) / n**2


def test_lgscm_optimizer(verdict):
    params = lg.LGSCMParams(d=4)
    ortho = 0.0
    common, own = [], []
    for seed in range(5):
        X_e, V_e = _shifted_pair(seed)
        kern = lg.build_kernel(X_e, V_e)
        start = lg.optimize(X_e, V_e, replace(params, max_outer=0), kern=kern)
        end = lg.optimize(X_e, V_e, params, kern=kern)
        ortho = max(ortho, lg.orthogonality_residual(end, kern))
        final = lg.gsdm_value(end, kern)
        common.append(final / lg.gsdm_value(replace(end, G=start.G), kern))
        own.append(final / lg.gsdm_value(start, kern))

    rng = np.random.default_rng(4)
    trace_err = 0.0
    for _ in range(200):
        n = int(rng.integers(4, 11))
        c = int(rng.integers(2, 6))
        kern = lg.build_kernel(rng.normal(size=(n, 3)), rng.normal(size=(c, 3)))
        graph = lg.build_affinity(kern.X_r[c:], 3)
        theta, G = rng.normal(size=(n + c, 4)), rng.random((c, n))
        model = lg.AlignmentModel(theta, G, G, np.zeros_like(G), 1.0, 1.0, 0.1, 4,
                                  kern.X_r, kern.sigma)
        trace_err = max(trace_err, abs(lg.lmsm_value(model, kern, graph)
                                       - _double_sum(theta, G, kern, graph.S)))

    ok = ortho <= 1e-6 and max(common) <= 0.5 and trace_err <= 1e-9
    verdict(4, ok, f"orthogonality {ortho:.1e}; mean discrepancy final/initial in the converged "
                   f"subspace max {max(common):.1e} (own-frame ratio max {max(own):.2f}); "
                   f"trace vs double sum {trace_err:.1e}")
    assert ok


# criterion 5

def _oracle_metrics(t, p):
    tp = sum(1 for a, b in zip(t, p) if a == 1 and b == 1)
    fp = sum(1 for a, b in zip(t, p) if a == 0 and b == 1)
    tn = sum(1 for a, b in zip(t, p) if a == 0 and b == 0)
    fn = sum(1 for a, b in zip(t, p) if a == 1 and b == 0)
    sen = tp / (tp + fn) if tp + fn else 0.0
    spe = tn / (tn + fp) if tn + fp else 0.0
    pre = tp / (tp + fp) if tp + fp else 0.0
    f = 2 * pre * sen / (pre + sen) if pre + sen else 0.0
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = (tp * tn - fp * fn) / den if den else 0.0
    return (tp, fp, tn, fn), ((sen + spe) / 2, f, math.sqrt(sen * spe), mcc)


def test_metric_oracle(verdict):
    rng = np.random.default_rng(5)
    count_mismatch = metric_mismatch = 0
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 60))
        t = rng.integers(0, 2, n)
        p = t.copy() if rng.random() < 0.05 else rng.integers(0, 2, n)
        counts, expect = _oracle_metrics(t.tolist(), p.tolist())
        c = ev.confusion(t, p)
        count_mismatch += (c.TP, c.FP, c.TN, c.FN) != counts
        m = ev.metrics(c)
        got = (m.auc, m.f_measure, m.g_mean, m.mcc)
        metric_mismatch += got != expect
        worst = max(worst, max(abs(a - b) for a, b in zip(got, expect)))

    # zero-denominator conventions
    cases = {
        (0, 0, 30, 10): (0.5, 0.0, 0.0, 0.0),   # never predicts minority
        (10, 30, 0, 0): (0.5, 0.4, 0.0, 0.0),   # always predicts minority
        (0, 0, 40, 0): (0.5, 0.0, 0.0, 0.0),    # no minority at all
        (10, 0, 30, 0): (1.0, 1.0, 1.0, 1.0),
    }
    degenerate = all(tuple(ev.metrics(ev.Confusion(*k)).as_dict()[x] for x in ev.METRIC_NAMES)
                     == v for k, v in cases.items())
    ok = count_mismatch == 0 and metric_mismatch == 0 and degenerate
    verdict(5, ok, f"10000 fuzzed vectors: {count_mismatch} count and {metric_mismatch} metric "
                   f"mismatches (max diff {worst:.1e}); degenerate cases "
                   f"{'ok' if degenerate else 'wrong'}")
    assert ok


# criterion 6

def test_divide_and_fuse(verdict):
    counts = subset_count(570, 178) == 3 and subset_count(100, 50) == 2
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(100):
        n_min = int(rng.integers(1, 40))
        n_maj = n_min + int(rng.integers(0, 200))
        X = rng.normal(size=(n_min + n_maj, int(rng.integers(1, 8))))
        y = rng.permutation(np.r_[np.ones(n_min, int), np.zeros(n_maj, int)])
        subs = divide_and_fuse(X, y)
        maj = np.concatenate([s.majority_indices for s in subs])
        bad += not (len(subs) == n_maj // n_min
                    and len(np.unique(maj)) == len(maj)
                    and np.all(y[maj] == 0)
                    and all(len(s.majority_indices) == len(s.minority_indices) == n_min
                            for s in subs))
    ok = counts and bad == 0
    verdict(6, ok, f"Q(570,178)={subset_count(570, 178)} Q(100,50)={subset_count(100, 50)}; "
                   f"{bad}/100 fuzzed partitions violate disjoint/balanced")
    assert ok


# criterion 7

def test_statistics(verdict):
    scores = np.tile([[0.9], [0.8], [0.7]], (1, 10))
    ranks = ev.average_ranks(scores)
    stat, p = ev.friedman_test(ranks, 3, 10)
    thresholds = sorted(h.threshold for h in ev.holm_test(np.full(7, 0.5)))
    ladder = np.allclose(thresholds, [0.05 / (7 - i) for i in range(7)], rtol=0, atol=1e-15)
    ok = (abs(stat - 20.0) <= 1e-12 and abs(p - math.exp(-10.0)) <= 1e-15 and ladder
          and round(thresholds[0], 5) == 0.00714)
    verdict(7, ok, f"chi2={stat:.6f} p={p:.4e} (closed form {math.exp(-10.0):.4e}); "
                   f"Holm first threshold {thresholds[0]:.5f}")
    assert ok


# criterion 8

def test_determinism(full_run, tmp_path, verdict):
    report, _, _ = full_run
    cfg = ex.config_from_manifest(report.directory / "manifest.json")
    again = ex.run_experiment(cfg, tmp_path / "rerun")
    same = {name: (again.directory / name).read_bytes() == (report.directory / name).read_bytes()
            for name in ("runs.csv", "means.csv")}
    ok = all(same.values())
    verdict(8, ok, " ".join(f"{k} {'identical' if v else 'differs'};" for k, v in same.items())
            + f" {len(again.records)} runs")
    assert ok


# criterion 9

def test_diversity_direction(full_run, verdict):
    report, _, _ = full_run
    mean_kappa = {}
    for method in ("full", "none"):
        rows = ex.kappa_report(report.directory, "ecoli3", method)
        mean_kappa[method] = float(np.mean([r["kappa"] for r in rows]))
    ok = mean_kappa["full"] < mean_kappa["none"]
    verdict(9, ok, f"ecoli3 mean pairwise kappa: full={mean_kappa['full']:.4f} "
                   f"none={mean_kappa['none']:.4f}")
    assert ok
