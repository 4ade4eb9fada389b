import math
from dataclasses import replace

import numpy as np
import pytest

from dsenlg import lgscm as lg


def _model(theta, G, kern):
    z = np.zeros_like(G)
    return lg.AlignmentModel(theta, G, G.copy(), z, 1.0, 1.0, 0.1, theta.shape[1],
                             kern.X_r, kern.sigma)


def _setup(rng, n=8, c=5, f=3, d=4):
    X_e = rng.normal(size=(n, f))
    V_e = rng.normal(size=(c, f))
    kern = lg.build_kernel(X_e, V_e)
    graph = lg.build_affinity(X_e, 3 if n > 3 else n - 1)
    theta = rng.normal(size=(n + c, d))
    G = rng.random((c, n))
    return X_e, V_e, kern, graph, theta, G


def test_gram_basics(rng):
    assert lg.gaussian_gram([[1.0, 2.0]], [[1.0, 2.0]], 0.7).tolist() == [[1.0]]
    sigma = 1.3
    K = lg.gaussian_gram([[0.0]], [[sigma * math.sqrt(2)]], sigma)
    assert K[0, 0] == pytest.approx(math.exp(-1.0))
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    G = lg.gaussian_gram(A, B, 0.9)
    np.testing.assert_allclose(G, lg.gaussian_gram(B, A, 0.9).T)
    oracle = [[math.exp(-sum((a - b) ** 2) / (2 * 0.81)) for b in B] for a in A]
    np.testing.assert_allclose(G, oracle, rtol=1e-12)
    with pytest.raises(ValueError):
        lg.gaussian_gram(A, B, 0.0)


def test_kernel_model_is_psd(rng):
    kern = lg.build_kernel(rng.normal(size=(12, 3)), rng.normal(size=(4, 3)))
    assert kern.gram.shape == (16, 16)
    np.testing.assert_allclose(kern.gram, kern.gram.T)
    assert np.linalg.eigvalsh(kern.gram).min() > -1e-8
    np.testing.assert_array_equal(kern.gram_v, kern.gram[:, :4])
    np.testing.assert_array_equal(kern.gram_e, kern.gram[:, 4:])


def test_affinity_collinear():
    g = lg.build_affinity(np.array([[0.0], [1.0], [2.0]]), 1)
    assert g.degrees.tolist() == [1.0, 2.0, 1.0]


def test_affinity_matches_brute_force(rng):
    X = rng.normal(size=(15, 2))
    K = 3
    g = lg.build_affinity(X, K)
    nn = []
    for i in range(15):
        d = sorted((float(np.sum((X[j] - X[i]) ** 2)), j) for j in range(15) if j != i)
        nn.append({j for _, j in d[:K]})
    S = np.array([[1.0 if (j in nn[i] or i in nn[j]) else 0.0 for j in range(15)]
                  for i in range(15)])
    np.testing.assert_array_equal(g.S, S)
    np.testing.assert_array_equal(g.S, g.S.T)
    np.testing.assert_array_equal(np.diag(g.D), S.sum(axis=1))
    with pytest.raises(ValueError):
        lg.build_affinity(X[:3], 3)


def lmsm_double_sum(theta, G, kern, S):
    n = S.shape[0]
    Zm = theta.T @ kern.gram_v @ G
    Ze = theta.T @ kern.gram_e
    total = 0.0
    for h in range(n):
        for e in range(n):
            total += S[h, e] * float(np.sum((Zm[:, h] - Ze[:, e]) ** 2))
    return total / n**2


@pytest.mark.parametrize("seed", range(20))
def test_lmsm_trace_form_equals_double_sum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    _, _, kern, graph, theta, G = _setup(rng, n=n, c=int(rng.integers(2, 6)))
    m = _model(theta, G, kern)
    val = lg.lmsm_value(m, kern, graph)
    assert val == pytest.approx(lmsm_double_sum(theta, G, kern, graph.S), abs=1e-9)
    assert val >= -1e-12


def test_lmsm_zero_cases(rng):
    _, _, kern, graph, theta, G = _setup(rng)
    assert lg.lmsm_value(_model(np.zeros_like(theta), G, kern), kern, graph) == 0.0
    empty = lg.GraphPair(np.zeros_like(graph.S), np.zeros_like(graph.D))
    assert lg.lmsm_value(_model(theta, G, kern), kern, empty) == 0.0
    with pytest.raises(ValueError):
        lg.lmsm_value(_model(theta[:-1], G, kern), kern, graph)


def test_gsdm_zero_cases(rng):
    X = rng.normal(size=(6, 2))
    kern = lg.build_kernel(X, X)
    theta = rng.normal(size=(12, 3))
    assert lg.gsdm_value(_model(theta, np.eye(6), kern), kern) == pytest.approx(0.0, abs=1e-20)
    assert lg.gsdm_value(_model(np.zeros((12, 3)), rng.random((6, 6)), kern), kern) == 0.0


def test_gsdm_one_dimensional_toy():
    # identity projection on a 1-row "kernel": means differ by dm
    n, dm = 7, 0.3
    x = np.linspace(0.0, 1.0, n)
    kern = lg.KernelModel(np.zeros((1, 1)), 1.0, np.ones((1, 1)), np.ones((1, n)),
                          x[None, :], n)
    # gram_v is a row of ones, so gram_v @ G is the column sums of G
    G = np.zeros((n, n))
    G[0] = x + dm
    m = _model(np.ones((1, 1)), G, kern)
    assert lg.gsdm_value(m, kern) == pytest.approx(n * dm**2)


def test_objective_reduces_to_lmsm(rng):
    X_e, V_e, kern, graph, theta, G = _setup(rng)
    m = replace(_model(theta, G, kern), lam=0.0, lam1=0.0)
    assert lg.objective(m, kern, graph) == lg.lmsm_value(m, kern, graph)
    m = _model(theta, G, kern)
    expect = lg.lmsm_value(m, kern, graph) + m.lam / len(X_e) * lg.gsdm_value(m, kern) \
        + m.lam1 * lg.nuclear_norm(G)
    assert lg.objective(m, kern, graph) == pytest.approx(expect)


def test_quadratic_form_matches_objective(rng):
    _, _, kern, graph, theta, G = _setup(rng)
    M = lg._quadratic_form(kern, graph, G, 1.0)
    m = replace(_model(theta, G, kern), lam1=0.0)
    assert np.trace(theta.T @ M @ theta) == pytest.approx(lg.objective(m, kern, graph))


def test_svt_shrinks_nuclear_norm(rng):
    M = rng.normal(size=(5, 7))
    for tau in (0.0, 0.3, 1.0, 100.0):
        out = lg.svt(M, tau)
        assert lg.nuclear_norm(out) <= lg.nuclear_norm(M) + 1e-12
    np.testing.assert_allclose(lg.svt(M, 0.0), M, atol=1e-12)
    assert np.all(lg.svt(M, 1e6) == 0.0)


def test_g_solver_residual(rng):
    n, c = 9, 4
    graph = lg.build_affinity(rng.normal(size=(n, 2)), 3)
    A = rng.normal(size=(c, c))
    P = A @ A.T
    R = rng.normal(size=(c, n))
    solver = lg._GSolver(graph, 1.0, n, 0.7)
    G = solver.solve(P, R)
    E = 2.0 / n**2 * (graph.D + np.ones((n, n)))
    np.testing.assert_allclose(P @ G @ E + 0.7 * G, R, atol=1e-10)


@pytest.mark.parametrize("metric", ["moment", "centered", "gram"])
def test_optimize_orthogonality_and_descent(rng, metric):
    X_e = rng.normal(size=(30, 6))
    V_e = X_e[:12] + rng.normal(0.0, 0.2, size=(12, 6))
    params = lg.LGSCMParams(metric=metric, d=5)
    kern = lg.build_kernel(X_e, V_e)
    model = lg.optimize(X_e, V_e, params, kern=kern)
    assert lg.orthogonality_residual(model, kern) <= 1e-6
    assert np.all(np.isfinite(model.theta)) and np.all(np.isfinite(model.G))
    graph = lg.build_affinity(X_e, 3)
    assert lg.objective(model, kern, graph) <= model.history[0] + 1e-12
    assert model.theta.shape == (42, 5)


def test_optimize_identical_sets(rng):
    X = rng.normal(size=(15, 3))
    kern = lg.build_kernel(X, X)
    # the local term trades a little mean alignment for neighbour agreement,
    # so the mean term needs to dominate for an exact match
    model = lg.optimize(X, X, lg.LGSCMParams(lam=1e4, lam1=0.0, d=6), G0=np.eye(15))
    assert lg.gsdm_value(model, kern) <= 1e-8
    loose = lg.optimize(X, X, lg.LGSCMParams(lam1=0.0, d=6), G0=np.eye(15))
    assert lg.gsdm_value(loose, kern) < 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_optimize_shifted_blobs_reduces_mmd(seed):
    # both transitions are measured in the converged subspace
    rng = np.random.default_rng(seed)
    X_e = rng.normal(size=(40, 2))
    V_e = rng.normal(size=(20, 2)) + np.array([3.0, 0.0])
    params = lg.LGSCMParams(d=4)
    kern = lg.build_kernel(X_e, V_e)
    start = lg.optimize(X_e, V_e, replace(params, max_outer=0), kern=kern)
    end = lg.optimize(X_e, V_e, params, kern=kern)
    before = lg.gsdm_value(replace(end, G=start.G), kern)
    assert lg.gsdm_value(end, kern) <= 0.5 * before


def test_zero_init_supported(rng):
    X_e = rng.normal(size=(20, 3))
    V_e = rng.normal(size=(8, 3))
    m = lg.optimize(X_e, V_e, lg.LGSCMParams(init="zero", d=3))
    assert m.G.shape == (8, 20)


def test_project(rng):
    X_e = rng.normal(size=(20, 3))
    V_e = rng.normal(size=(6, 3))
    kern = lg.build_kernel(X_e, V_e)
    model = lg.optimize(X_e, V_e, lg.LGSCMParams(d=4), kern=kern)
    np.testing.assert_allclose(lg.project(model, kern, V_e), model.theta.T @ kern.gram_v,
                               atol=1e-12)
    q = np.vstack([V_e[2], rng.normal(size=3)])
    out = lg.project(model, kern, q)
    np.testing.assert_allclose(out[:, 0], (model.theta.T @ kern.gram_v)[:, 2], atol=1e-12)
    manual = model.theta.T @ np.array(
        [math.exp(-float(np.sum((r - q[1]) ** 2)) / (2 * kern.sigma**2)) for r in kern.X_r])
    np.testing.assert_allclose(out[:, 1], manual, atol=1e-12)
    np.testing.assert_allclose(model.project(q), out.T)
    with pytest.raises(ValueError):
        lg.project(model, kern, np.zeros((1, 2)))


def test_degenerate_kernel():
    with pytest.raises(lg.DegenerateKernelError):
        lg._ThetaSolver(np.zeros((4, 4)), 2, 1e-2)


def test_median_bandwidth():
    X = np.array([[0.0], [1.0], [3.0]])
    assert lg.median_bandwidth(X) == 2.0
    assert lg.median_bandwidth(np.zeros((3, 2))) == 1.0
