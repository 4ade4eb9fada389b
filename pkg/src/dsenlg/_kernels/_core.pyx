# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled FCM sweep and gain-ratio split scan.

Semantics match ``_fallback.py`` exactly; only the loop mechanics differ.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2, pow, fabs, INFINITY, NAN

cnp.import_array()

cdef double SPLIT_INFO_FLOOR = 1e-12


cdef inline double _powm(double x, double m) noexcept nogil:
    # m = 2 is the common case and pow() dominates the sweep otherwise
    if m == 2.0:
        return x * x
    return pow(x, m)


cdef void _prototypes(double[:, ::1] X, double[:, ::1] U, double m,
                      double[:, ::1] V, double[::1] wsum) noexcept nogil:
    """Weighted means; a prototype with zero total weight keeps its position."""
    cdef Py_ssize_t c = U.shape[0], n = U.shape[1], p = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double w
    for i in range(c):
        wsum[i] = 0.0
        for j in range(n):
            wsum[i] += _powm(U[i, j], m)
        if wsum[i] <= 0.0:
            continue
        for k in range(p):
            V[i, k] = 0.0
        for j in range(n):
            w = _powm(U[i, j], m)
            for k in range(p):
                V[i, k] += w * X[j, k]
        for k in range(p):
            V[i, k] /= wsum[i]


cdef double _sweep(double[:, ::1] X, double[:, ::1] V, double m,
                   double[:, ::1] U, double[:, ::1] D2) noexcept nogil:
    """Distances, membership update and objective; returns the objective."""
    cdef Py_ssize_t c = V.shape[0], n = X.shape[0], p = X.shape[1]
    cdef Py_ssize_t i, j, k, zi
    cdef double acc, diff, s, expo = -1.0 / (m - 1.0), J = 0.0
    for i in range(c):
        for j in range(n):
            acc = 0.0
            for k in range(p):
                diff = V[i, k] - X[j, k]
                acc += diff * diff
            D2[i, j] = acc
    for j in range(n):
        zi = -1
        for i in range(c):
            if D2[i, j] <= 0.0:
                zi = i
                break
        if zi >= 0:
            for i in range(c):
                U[i, j] = 0.0
            U[zi, j] = 1.0
        else:
            s = 0.0
            for i in range(c):
                if m == 2.0:
                    U[i, j] = 1.0 / D2[i, j]
                else:
                    U[i, j] = pow(D2[i, j], expo)
                s += U[i, j]
            for i in range(c):
                U[i, j] /= s
        for i in range(c):
            J += _powm(U[i, j], m) * D2[i, j]
    return J


def fcm_iterate(X, U, double m, double eps, int max_iter):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    Uarr = np.array(U, dtype=np.float64, order="C")
    cdef double[:, ::1] Uv = Uarr
    cdef Py_ssize_t c = Uv.shape[0], n = Uv.shape[1], p = Xv.shape[1]
    Varr = np.zeros((c, p), dtype=np.float64)
    cdef double[:, ::1] Vv = Varr
    cdef double[:, ::1] D2 = np.empty((c, n), dtype=np.float64)
    cdef double[::1] wsum = np.empty(c, dtype=np.float64)
    cdef int w
    cdef double J, prev = 0.0
    trace = []
    _prototypes(Xv, Uv, m, Vv, wsum)
    for w in range(max_iter):
        _prototypes(Xv, Uv, m, Vv, wsum)
        J = _sweep(Xv, Vv, m, Uv, D2)
        trace.append(J)
        if w > 0 and fabs(prev - J) < eps:
            break
        prev = J
    return Uarr, Varr, trace


cdef inline double _h2(double pos, double tot) noexcept nogil:
    cdef double pp, q, h = 0.0
    if tot <= 0.0:
        return 0.0
    pp = pos / tot
    q = 1.0 - pp
    if pp > 0.0:
        h -= pp * log2(pp)
    if q > 0.0:
        h -= q * log2(q)
    return h


def best_split(X, y):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], s = Xv.shape[1]
    cdef Py_ssize_t f, i
    cdef double total_pos = 0.0, parent, cum, nl, nr, pl, pr, gain, fl, fr
    cdef double split_info, ratio, thr
    cdef double best_ratio = -INFINITY, best_thr = NAN, best_gain = 0.0
    cdef Py_ssize_t best_f = -1
    cdef cnp.intp_t[::1] order
    if n < 2:
        return (-1, float("nan"), -float("inf"), 0.0)
    for i in range(n):
        total_pos += yv[i]
    parent = _h2(total_pos, <double>n)
    Xarr = np.asarray(Xv)
    for f in range(s):
        order = np.argsort(Xarr[:, f], kind="stable").astype(np.intp)
        cum = 0.0
        for i in range(1, n):
            cum += yv[order[i - 1]]
            if not Xv[order[i], f] > Xv[order[i - 1], f]:
                continue
            nl = <double>i
            nr = <double>(n - i)
            pl = cum
            pr = total_pos - cum
            gain = parent - (nl * _h2(pl, nl) + nr * _h2(pr, nr)) / n
            fl = nl / n
            fr = nr / n
            split_info = -(fl * log2(fl) + fr * log2(fr))
            if split_info < SPLIT_INFO_FLOOR:
                split_info = SPLIT_INFO_FLOOR
            ratio = gain / split_info
            if ratio > best_ratio:
                best_ratio = ratio
                best_gain = gain
                best_f = f
                thr = Xv[order[i - 1], f] + (Xv[order[i], f] - Xv[order[i - 1], f]) / 2.0
                if not thr < Xv[order[i], f]:
                    thr = Xv[order[i - 1], f]
                best_thr = thr
    return (int(best_f), float(best_thr), float(best_ratio), float(best_gain))
