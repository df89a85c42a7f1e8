"""Low end of the Kirchhoff Laplacian spectrum.

The generalized problem ``K phi = lam M phi`` is solved by shift-inverted
block subspace iteration with Rayleigh-Ritz extraction.  The constant mode,
whose eigenvalue is exactly zero, is removed from the search space by an
M-orthogonal projection and reported separately as the first pair.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import splu

from .errors import NoConvergence
from .graph import MetricGraph
from .mesh import GraphFunction, Mesh, build_mesh

log = logging.getLogger(__name__)

CLUSTER_RTOL = 1e-8


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, M-orthonormal
    residuals: np.ndarray
    iterations: int
    mesh: Mesh | None = None

    def eigenfunction(self, i: int) -> GraphFunction:
        if self.mesh is None:
            raise ValueError("result was computed without a mesh")
        return GraphFunction(self.mesh, self.eigenvectors[:, i].copy())

    def clusters(self, rtol: float = CLUSTER_RTOL) -> list[tuple[float, int]]:
        """``(representative value, multiplicity)`` for each eigenvalue cluster."""
        out: list[list[float]] = []
        for lam in self.eigenvalues:
            if out and abs(lam - out[-1][0]) <= rtol * max(abs(lam), abs(out[-1][0]), 1e-300):
                out[-1].append(lam)
            else:
                out.append([lam])
        return [(c[0], len(c)) for c in out]


def _residuals(K, M, lam, X):
    R = K @ X - (M @ X) * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)


def eigenpairs(K, M, k: int = 2, tol: float = 1e-10, seed: int = 0,
               shift: float = -1.0, max_iters: int = 1000, mesh: Mesh | None = None
               ) -> SpectralResult:
    """The ``k`` smallest eigenpairs of ``K phi = lam M phi``.

    ``K`` must be positive semidefinite with constants in its kernel and ``M``
    positive definite.  The first returned pair is the constant mode.  The
    start basis is drawn from ``numpy.random.default_rng(seed)``.

    Raises
    ------
    NoConvergence
        Residuals above ``tol * ||phi||`` after ``max_iters`` sweeps.
    """
    n = K.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds problem size {n}")

    one = np.ones(n)
    c = one / math.sqrt(one @ (M @ one))
    Mc = M @ c

    def deflate(X):
        return X - np.outer(c, Mc @ X)

    want = k - 1
    block = min(n - 1, max(2 * want, want + 8))
    # machine-precision floor for the residual test
    knorm = abs(K).sum(axis=0).max()
    floor = 200.0 * np.finfo(float).eps * knorm

    if n - 1 <= 3 * block:
        # small problem: dense solve on the deflated space is cheaper and exact
        lam, X = la.eigh(K.toarray(), M.toarray())
        order = np.argsort(lam)
        lam, X = lam[order], X[:, order]
        # drop the computed null vector closest to the constant
        j = int(np.argmax(np.abs(Mc @ X)))
        keep = [i for i in range(n) if i != j][:want]
        lam_nc = lam[keep]
        X_nc = deflate(X[:, keep])
        X_nc, lam_nc = _ritz(K, M, X_nc)
        iters = 1
    else:
        rng = np.random.default_rng(seed)
        X = deflate(rng.standard_normal((n, block)))
        lu = splu((K - shift * M).tocsc())
        lam_nc = None
        for iters in range(1, max_iters + 1):
            Y = deflate(lu.solve(np.asarray(M @ X)))
            X, lam_all = _ritz(K, M, Y)
            lam_nc = lam_all[:want]
            res = _residuals(K, M, lam_nc, X[:, :want])
            if np.all(res <= max(tol, floor)):
                break
        else:
            raise NoConvergence(
                f"subspace iteration: residuals {res.max():.3e} > {tol:.1e} after {max_iters} sweeps",
                iterations=max_iters,
            )
        X_nc = X[:, :want]

    lam = np.concatenate([[0.0], lam_nc])
    vecs = np.column_stack([c, X_nc])
    res = _residuals(K, M, lam, vecs)
    if np.any(res > max(tol, floor)):
        raise NoConvergence(f"residual {res.max():.3e} exceeds tolerance {tol:.1e}", iterations=iters)
    return SpectralResult(lam, vecs, res, iters, mesh)


def _ritz(K, M, Y):
    Q, _ = np.linalg.qr(Y)
    A = Q.T @ (K @ Q)
    B = Q.T @ (M @ Q)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    theta, C = la.eigh(A, B)
    X = Q @ C  # M-orthonormal by construction of eigh(A, B)
    return X, theta


def mesh_eigenpairs(mesh: Mesh, k: int = 2, tol: float = 1e-10, seed: int = 0) -> SpectralResult:
    return eigenpairs(mesh.K, mesh.M, k=k, tol=tol, seed=seed, mesh=mesh)


def second_eigenpair(mesh: Mesh, tol: float = 1e-10, seed: int = 0, k: int = 4):
    """``(lambda_2, phi_2, multiplicity)``: smallest positive cluster and one eigenfunction."""
    while True:
        k = min(k, mesh.n_dofs)
        res = mesh_eigenpairs(mesh, k=k, tol=tol, seed=seed)
        cl = res.clusters()
        positive = [(v, m) for v, m in cl if v > tol]
        # need the whole cluster inside the computed range to know its multiplicity
        if len(positive) >= 2 or k == mesh.n_dofs:
            break
        k *= 2
    lam2, mult = positive[0]
    i = int(np.argmax(res.eigenvalues > tol))
    return float(lam2), res.eigenfunction(i), mult


def friedlander_bound(g: MetricGraph) -> float:
    """``pi^2 / l^2``: lower bound for lambda_2 of any compact graph of total length l."""
    return math.pi ** 2 / g.total_length ** 2


def lambda2(g: MetricGraph, h_target: float | None = None, tol: float = 1e-10, seed: int = 0) -> float:
    """First positive Kirchhoff eigenvalue on a P1 mesh of ``g``.

    Logs a warning when the discrete value falls below ``pi^2/l^2`` (which
    can only be a discretization artefact).
    """
    mesh = build_mesh(g, h_target)
    lam2, _, _ = second_eigenpair(mesh, tol=tol, seed=seed)
    bound = friedlander_bound(g)
    if lam2 < bound - tol:
        log.warning("lambda_2 = %.12g below pi^2/l^2 = %.12g; refine the mesh", lam2, bound)
    return lam2
