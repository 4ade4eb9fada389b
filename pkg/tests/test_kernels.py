"""The compiled kernels must agree with the numpy fallback."""
import numpy as np
import pytest

from dsenlg import _kernels
from dsenlg._kernels import _fallback

core = pytest.importorskip("dsenlg._kernels._core", reason="compiled extension not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("m", [2.0, 1.5, 3.0])
@pytest.mark.parametrize("seed", range(6))
def test_fcm_iterate_agrees(seed, m):
    r = np.random.default_rng(seed)
    n, p, c = int(r.integers(5, 50)), int(r.integers(1, 9)), int(r.integers(1, 6))
    X = r.normal(size=(n, p))
    U = r.random((c, n)) + 1e-12
    U /= U.sum(axis=0)
    Uc, Vc, tc = core.fcm_iterate(X, U, m, 1e-9, 300)
    Uf, Vf, tf = _fallback.fcm_iterate(X, U, m, 1e-9, 300)
    assert len(tc) == len(tf)
    np.testing.assert_allclose(tc, tf, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(Uc, Uf, atol=1e-10)
    np.testing.assert_allclose(Vc, Vf, atol=1e-10)


def test_fcm_zero_distance_agrees():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    U = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    a = core.fcm_iterate(X, U, 2.0, 1e-9, 10)
    b = _fallback.fcm_iterate(X, U, 2.0, 1e-9, 10)
    np.testing.assert_array_equal(a[0], b[0])


@pytest.mark.parametrize("seed", range(10))
def test_best_split_agrees(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 60))
    X = np.round(r.normal(size=(n, int(r.integers(1, 6)))), 1)  # rounding forces ties
    y = r.integers(0, 2, n)
    a = core.best_split(X, y)
    b = _fallback.best_split(X, y)
    assert a[0] == b[0]
    if a[0] >= 0:
        assert a[1] == b[1]
        assert a[2] == pytest.approx(b[2], abs=1e-12)
        assert a[3] == pytest.approx(b[3], abs=1e-12)


def test_best_split_no_candidate():
    X = np.ones((4, 2))
    for mod in (core, _fallback):
        f, thr, ratio, gain = mod.best_split(X, np.array([0, 1, 0, 1]))
        assert f == -1 and np.isnan(thr) and ratio == -np.inf


def test_fcm_all_duplicate_rows_stay_finite():
    # every row coincides with the first prototype, the others lose all weight
    X = np.ones((10, 2))
    U = np.random.default_rng(0).random((5, 10))
    U /= U.sum(axis=0)
    for mod in (core, _fallback):
        Um, V, trace = mod.fcm_iterate(X, U, 2.0, 1e-5, 50)
        assert np.isfinite(V).all() and np.isfinite(trace).all()
        np.testing.assert_array_equal(Um[0], 1.0)
