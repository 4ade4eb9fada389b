"""Local-global structure consistency between a layer's input and prototypes.

A kernel subspace ``Theta`` (coefficients over the reference set
``X_r = [V_e; X_e]``) and a transition generator ``G`` (c x n) are fit so that
the transition set ``Psi_v G`` matches ``X_e`` both locally (graph-weighted
pairwise distances) and globally (projected mean discrepancy), with a nuclear
norm penalty on ``G``. The solver alternates:

1. ``H``: singular value soft-threshold of ``G + zeta / delta`` at ``lam1 / delta``
2. ``G``: exact minimiser of the smooth part plus the augmented penalty
   (a Sylvester-type system solved in the joint eigenbasis)
3. ``Theta``: the ``d`` smallest generalised eigenvectors of the quadratic
   form on the numerical range of ``Psi``, returned in a basis with
   ``Theta.T @ Psi @ Theta = I``
4. ``zeta += delta * (G - H)``
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import _kernels

log = logging.getLogger(__name__)


class DegenerateKernelError(ValueError):
    pass


def gaussian_gram(A, B, sigma: float) -> np.ndarray:
    """``exp(-||a_i - b_j||^2 / (2 sigma^2))`` for all row pairs."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    return np.exp(-_kernels.sq_dists(A, B) / (2.0 * sigma * sigma))


def median_bandwidth(X) -> float:
    """Median pairwise Euclidean distance between distinct rows (1.0 if all coincide)."""
    X = np.asarray(X, dtype=float)
    d2 = _kernels.sq_dists(X, X)
    iu = np.triu_indices(len(X), k=1)
    dist = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(dist)) if dist.size else 0.0
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class GraphPair:
    S: np.ndarray
    D: np.ndarray

    @property
    def degrees(self) -> np.ndarray:
        return np.diag(self.D)


def build_affinity(X_e, K: int) -> GraphPair:
    """Symmetric kNN graph: ``S[h, e] = 1`` if either is among the other's K nearest."""
    X = np.asarray(X_e, dtype=float)
    n = len(X)
    if n <= K:
        raise ValueError(f"need more than K={K} rows for the affinity graph, got {n}")
    d2 = _kernels.sq_dists(X, X)
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :K]
    S = np.zeros((n, n))
    S[np.repeat(np.arange(n), K), nbrs.ravel()] = 1.0
    S = np.maximum(S, S.T)
    return GraphPair(S, np.diag(S.sum(axis=1)))


@dataclass(frozen=True)
class KernelModel:
    X_r: np.ndarray
    sigma: float
    gram: np.ndarray
    gram_v: np.ndarray
    gram_e: np.ndarray
    n_prototypes: int


def build_kernel(X_e, V_e, sigma: Optional[float] = None,
                 sigma_scale: float = 1.0) -> KernelModel:
    X_e = np.asarray(X_e, dtype=float)
    V_e = np.asarray(V_e, dtype=float)
    if X_e.shape[1] != V_e.shape[1]:
        raise ValueError("X_e and V_e must share their column count")
    X_r = np.vstack([V_e, X_e])
    if sigma is None:
        sigma = sigma_scale * median_bandwidth(X_r)
    gram = gaussian_gram(X_r, X_r, sigma)
    c = len(V_e)
    return KernelModel(X_r, float(sigma), gram, gram[:, :c].copy(), gram[:, c:].copy(), c)


@dataclass(frozen=True)
class LGSCMParams:
    lam: float = 1.0
    lam1: float = 0.1
    delta: float = 1.0
    d: int = 20
    K: int = 3
    sigma: Optional[float] = None  # None -> sigma_scale * median distance over X_r
    sigma_scale: float = 1.0
    max_outer: int = 50
    tol: float = 1e-4
    init: str = "membership"  # or "zero"
    rank_tol: float = 1e-2  # kernel eigenvalues below rank_tol * max are dropped
    metric: str = "moment"  # subspace selection metric, see _ThetaSolver
    pool: Optional[int] = None


@dataclass
class AlignmentModel:
    theta: np.ndarray
    G: np.ndarray
    H: np.ndarray
    zeta: np.ndarray
    delta: float
    lam: float
    lam1: float
    d: int
    X_r: np.ndarray
    sigma: float
    history: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0

    def project(self, samples) -> np.ndarray:
        """Subspace coordinates, one row per sample (transpose of Theta^T Psi)."""
        return (self.theta.T @ gaussian_gram(self.X_r, samples, self.sigma)).T


def _check(model: AlignmentModel, kern: KernelModel):
    r = len(kern.X_r)
    c = kern.n_prototypes
    if model.theta.shape[0] != r or model.G.shape[0] != c or \
            model.G.shape[1] != kern.gram_e.shape[1]:
        raise ValueError("shape mismatch between alignment model and kernel model")


def lmsm_value(model: AlignmentModel, kern: KernelModel, graph: GraphPair) -> float:
    """Graph-weighted local discrepancy between transition set and inputs."""
    _check(model, kern)
    n = kern.gram_e.shape[1]
    if graph.S.shape != (n, n):
        raise ValueError("affinity graph size does not match X_e")
    Zm = model.theta.T @ kern.gram_v @ model.G
    Ze = model.theta.T @ kern.gram_e
    t1 = np.trace(Zm @ graph.D @ Zm.T)
    t2 = np.trace(Ze @ graph.D @ Ze.T)
    t3 = np.trace(Zm @ graph.S @ Ze.T)
    return float((t1 + t2 - 2.0 * t3) / n**2)


def gsdm_value(model: AlignmentModel, kern: KernelModel) -> float:
    """Squared norm of the projected mean discrepancy, scaled by 1/n."""
    _check(model, kern)
    n = kern.gram_e.shape[1]
    w = model.theta.T @ (kern.gram_v @ model.G - kern.gram_e) @ np.ones(n)
    return float(w @ w / n)


def nuclear_norm(M) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def objective(model: AlignmentModel, kern: KernelModel, graph: GraphPair) -> float:
    """Full penalised objective; the mean term carries ``lam / n**2``."""
    n = kern.gram_e.shape[1]
    val = lmsm_value(model, kern, graph)
    if model.lam:
        val += model.lam / n * gsdm_value(model, kern)
    if model.lam1:
        val += model.lam1 * nuclear_norm(model.G)
    return val


def svt(M, tau: float) -> np.ndarray:
    """Singular value soft-thresholding."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return (U * np.maximum(s - tau, 0.0)) @ Vt


def _quadratic_form(kern, graph, G, lam):
    """r x r matrix M with objective-without-nuclear = Tr(Theta^T M Theta)."""
    n = kern.gram_e.shape[1]
    A = kern.gram_v @ G
    B = kern.gram_e
    deg = graph.degrees
    cross = (A @ graph.S) @ B.T
    M = (A * deg) @ A.T + (B * deg) @ B.T - cross - cross.T
    if lam:
        w = (A - B).sum(axis=1)
        M = M + lam * np.outer(w, w)
    M = M / n**2
    return (M + M.T) / 2.0


class _ThetaSolver:
    """Picks the d-dimensional subspace and returns it in a Gram-orthonormal basis.

    ``metric="gram"`` solves ``M theta = mu Psi theta`` directly on the range
    of ``Psi``. ``"centered"`` and ``"moment"`` select the subspace against the
    centred (``Psi H Psi``) or raw (``Psi Psi``) second moment of the projected
    reference set, then re-orthonormalise it against ``Psi``.
    """

    def __init__(self, gram, d, rank_tol, metric="gram", pool=None):
        gram = (gram + gram.T) / 2.0
        evals, evecs = np.linalg.eigh(gram)
        floor = rank_tol * max(float(evals[-1]), 1e-300)
        keep = evals > floor
        if pool is not None:
            keep &= np.arange(len(evals)) >= len(evals) - pool
        if not keep.any():
            raise DegenerateKernelError("Gram matrix is numerically rank 0")
        self.metric = metric
        self.W = evecs[:, keep] / np.sqrt(evals[keep])
        self.d = min(d, int(keep.sum()))
        if metric != "gram":
            # work in the whitened range basis: theta = W y, so y^T y = theta^T Psi theta
            Zr = gram @ self.W  # projections of X_r for each basis vector
            if metric == "centered":
                Zr = Zr - Zr.mean(axis=0)
            elif metric != "moment":
                raise ValueError(f"unknown theta metric {metric!r}")
            N = Zr.T @ Zr
            N = (N + N.T) / 2.0
            N += 1e-8 * max(np.trace(N) / len(N), 1e-300) * np.eye(len(N))
            self.N = N
            self.d = min(self.d, len(N) - (1 if metric == "centered" else 0))

    def solve(self, M):
        Mr = self.W.T @ M @ self.W
        Mr = (Mr + Mr.T) / 2.0
        if self.metric == "gram":
            _, Y = np.linalg.eigh(Mr)
            return self.W @ Y[:, :self.d]
        _, Y = scipy.linalg.eigh(Mr, self.N)
        Y = Y[:, :self.d]
        # Gram-orthonormal basis of the same subspace (ordering kept by a QR sweep)
        Q, _ = np.linalg.qr(Y)
        return self.W @ Q


class _GSolver:
    """Solves ``P G E + delta G = R`` with symmetric PSD ``P`` and ``E``."""

    def __init__(self, graph, lam, n, delta):
        E = 2.0 / n**2 * (graph.D + lam * np.ones((n, n)))
        self.e, self.Ue = np.linalg.eigh((E + E.T) / 2.0)
        self.delta = delta

    def solve(self, P, R):
        p, Up = np.linalg.eigh((P + P.T) / 2.0)
        Rt = Up.T @ R @ self.Ue
        Gt = Rt / (np.outer(p, self.e) + self.delta)
        return Up @ Gt @ self.Ue.T


def default_transition(X_e, V_e, m: float = 2.0) -> np.ndarray:
    """Soft FCM-style assignment of every X_e row to the V_e rows (c x n)."""
    return _kernels.fcm_memberships(_kernels.sq_dists(V_e, X_e), m)


def optimize(X_e, V_e, params: LGSCMParams = LGSCMParams(), seed: int = 0,
             G0: Optional[np.ndarray] = None, graph: Optional[GraphPair] = None,
             kern: Optional[KernelModel] = None) -> AlignmentModel:
    """Fit the alignment between inputs ``X_e`` (n rows) and prototypes ``V_e`` (c rows).

    ``G0`` is the transition warm start (defaults to soft memberships of X_e
    to V_e); ``params.init == "zero"`` starts from ``G = H = 0`` instead.
    The returned model is the iterate with the lowest objective seen, which
    includes the starting point. ``seed`` is accepted for interface symmetry;
    the solver itself is deterministic.
    """
    X_e = np.asarray(X_e, dtype=float)
    V_e = np.asarray(V_e, dtype=float)
    n, c = len(X_e), len(V_e)
    if kern is None:
        kern = build_kernel(X_e, V_e, params.sigma, params.sigma_scale)
    if graph is None:
        graph = build_affinity(X_e, params.K)
    r = c + n
    d = max(1, min(params.d, r - 1))
    theta_solver = _ThetaSolver(kern.gram, d, params.rank_tol, params.metric, params.pool)
    g_solver = _GSolver(graph, params.lam, n, params.delta)

    if params.init == "zero":
        G = np.zeros((c, n))
    elif G0 is not None:
        G = np.array(G0, dtype=float)
    else:
        G = default_transition(X_e, V_e)
    if G.shape != (c, n):
        raise ValueError(f"transition warm start must be {c} x {n}")
    H = G.copy()
    zeta = np.zeros_like(G)
    theta = theta_solver.solve(_quadratic_form(kern, graph, G, params.lam))

    def snapshot(G, H, zeta, theta, k):
        return AlignmentModel(theta, G, H, zeta, params.delta, params.lam, params.lam1,
                              theta.shape[1], kern.X_r, kern.sigma, n_iter=k)

    current = snapshot(G, H, zeta, theta, 0)
    best = current
    best_val = objective(current, kern, graph)
    history = [best_val]
    converged = False
    # constant part of the G-system right-hand side: Psi_v^T Theta Theta^T Psi_e (S + lam 11^T)
    SL = graph.S + params.lam * np.ones((n, n))
    for k in range(1, params.max_outer + 1):
        H = svt(G + zeta / params.delta, params.lam1 / params.delta)
        Av = theta.T @ kern.gram_v
        P = Av.T @ Av
        R = 2.0 / n**2 * (Av.T @ (theta.T @ kern.gram_e) @ SL) - zeta + params.delta * H
        G = g_solver.solve(P, R)
        theta = theta_solver.solve(_quadratic_form(kern, graph, G, params.lam))
        zeta = zeta + params.delta * (G - H)
        current = snapshot(G, H, zeta, theta, k)
        val = objective(current, kern, graph)
        history.append(val)
        if val < best_val:
            best, best_val = current, val
        rel = abs(history[-2] - val) / max(abs(history[-2]), 1e-300)
        gap = np.linalg.norm(G - H) / max(np.linalg.norm(G), 1e-300)
        if rel < params.tol and gap < params.tol:
            converged = True
            break
    if not converged:
        log.debug("LGSCM stopped after %d outer iterations without converging", params.max_outer)
    best.history = history
    best.converged = converged
    return best


def project(model: AlignmentModel, kern: Optional[KernelModel], samples) -> np.ndarray:
    """``Theta^T gram(X_r, samples)`` as a (d x m) matrix."""
    X_r = model.X_r if kern is None else kern.X_r
    sigma = model.sigma if kern is None else kern.sigma
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != X_r.shape[1]:
        raise ValueError("samples do not match the reference set's column count")
    return model.theta.T @ gaussian_gram(X_r, samples, sigma)


def orthogonality_residual(model: AlignmentModel, kern: KernelModel) -> float:
    d = model.theta.shape[1]
    return float(np.abs(model.theta.T @ kern.gram @ model.theta - np.eye(d)).max())
