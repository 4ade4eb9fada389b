"""Pure numpy versions of the hot loops.

These are the reference implementations; ``_core.pyx`` mirrors them and the
test suite checks the two agree.
"""
import numpy as np

SPLIT_INFO_FLOOR = 1e-12


def sq_dists(A, B):
    """Squared Euclidean distances between rows of ``A`` and rows of ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def fcm_memberships(D2, m):
    """Membership update from squared distances ``D2`` (c x n).

    Columns with a zero distance assign full membership to the first
    prototype at zero distance.
    """
    c, n = D2.shape
    U = np.empty_like(D2)
    zero = D2 <= 0.0
    hit = zero.any(axis=0)
    if (~hit).any():
        inv = D2[:, ~hit] ** (-1.0 / (m - 1.0))
        U[:, ~hit] = inv / inv.sum(axis=0)
    if hit.any():
        cols = np.flatnonzero(hit)
        U[:, cols] = 0.0
        U[np.argmax(zero[:, cols], axis=0), cols] = 1.0
    return U


def fcm_prototypes(X, U, m, V_prev=None):
    """Weighted means; a prototype with zero total weight keeps ``V_prev``."""
    W = U ** m
    s = W.sum(axis=1, keepdims=True)
    V = np.zeros((len(U), X.shape[1])) if V_prev is None else np.array(V_prev, dtype=float)
    return np.divide(W @ X, s, out=V, where=s > 0)


def fcm_objective(D2, U, m):
    return float(np.sum((U ** m) * D2))


def fcm_iterate(X, U, m, eps, max_iter):
    """Alternate prototype and membership updates.

    Returns ``(U, V, trace)``; ``trace[w]`` is the objective after the w-th
    full sweep, so it is non-increasing.
    """
    X = np.asarray(X, dtype=float)
    U = np.array(U, dtype=float)
    trace = []
    V = fcm_prototypes(X, U, m)
    for _ in range(max_iter):
        V = fcm_prototypes(X, U, m, V)
        D2 = sq_dists(V, X)
        U = fcm_memberships(D2, m)
        trace.append(fcm_objective(D2, U, m))
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) < eps:
            break
    return U, V, trace


def _entropy2(pos, tot):
    p = np.divide(pos, tot, out=np.zeros_like(pos, dtype=float), where=tot > 0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def best_split(X, y):
    """Best binary threshold split by gain ratio.

    ``y`` holds 0/1 labels. Candidates are midpoints between consecutive
    distinct sorted values. Returns ``(feature, threshold, gain_ratio,
    info_gain)``, or ``(-1, nan, -inf, 0.0)`` when no candidate exists.
    Ties keep the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, s = X.shape
    total_pos = y.sum()
    parent = _entropy2(np.array([total_pos]), np.array([float(n)]))[0]
    best = (-1, np.nan, -np.inf, 0.0)
    if n < 2:
        return best
    for f in range(s):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        valid = np.flatnonzero(xs[1:] > xs[:-1]) + 1
        if valid.size == 0:
            continue
        cum = np.cumsum(ys)
        nl = valid.astype(float)
        pl = cum[valid - 1]
        nr = n - nl
        pr = total_pos - pl
        child = (nl * _entropy2(pl, nl) + nr * _entropy2(pr, nr)) / n
        gain = parent - child
        fl = nl / n
        fr = nr / n
        split_info = -(fl * np.log2(fl) + fr * np.log2(fr))
        ratio = gain / np.maximum(split_info, SPLIT_INFO_FLOOR)
        k = int(np.argmax(ratio))
        if ratio[k] > best[2]:
            i = valid[k]
            thr = xs[i - 1] + (xs[i] - xs[i - 1]) / 2.0
            if not thr < xs[i]:
                thr = xs[i - 1]
            best = (f, float(thr), float(ratio[k]), float(gain[k]))
    return best
