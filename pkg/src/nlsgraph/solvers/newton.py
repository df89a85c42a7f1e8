"""Newton's method for the mass-constrained stationary equation."""
from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, splu

from ..energy import EnergyParams, MorseConfig, hessian_matrix
from ..errors import Diverged, SingularJacobian
from ..mesh import GraphFunction, nonlinear_load
from .state import BoundState, make_state


def _residual(v: np.ndarray, lam: float, params: EnergyParams, mesh):
    Kv = mesh.K @ v
    Mv = mesh.M @ v
    N = params.rho * nonlinear_load(v, params.p - 2, mesh) if params.rho else np.zeros_like(v)
    F1 = Kv + lam * Mv - N
    F2 = 0.5 * (v @ Mv - params.mu)
    # relative size: each block against the magnitude of its own terms
    scale = max(np.abs(Kv).max(), abs(lam) * np.abs(Mv).max(), np.abs(N).max(), 1e-300)
    return F1, F2, max(np.abs(F1).max() / scale, abs(F2) / params.mu)


def newton_refine(u0: GraphFunction, lam0: float, params: EnergyParams, tol: float = 1e-10,
                  max_iters: int = 50, kind: str = "solution",
                  morse_cfg: MorseConfig | None = None) -> BoundState:
    """Damped Newton on ``F(u, lam) = (K u + lam M u - rho N(u), (u^T M u - mu)/2)``.

    The stopping test is on the relative residual: the first block is
    measured against ``max(|K u|, |lam M u|, |rho N(u)|)`` and the mass block
    against ``mu``.  The residual history is kept on the returned state.

    Raises
    ------
    SingularJacobian
        The bordered Jacobian could not be factorized.
    Diverged
        Non-finite iterates, or ``max_iters`` reached without meeting ``tol``.
    """
    mesh = u0.mesh
    v = np.array(u0.values, dtype=float)
    lam = float(lam0)
    F1, F2, r = _residual(v, lam, params, mesh)
    history = [r]
    it = 0
    while r > tol:
        if it >= max_iters:
            raise Diverged(f"Newton: residual {r:.3e} after {it} iterations",
                           make_state(GraphFunction(mesh, v), lam, params, kind, None, it, history))
        H = hessian_matrix(GraphFunction(mesh, v), lam, params)
        Mv = (mesh.M @ v).reshape(-1, 1)
        J = sp.bmat([[H, sp.csr_matrix(Mv)], [sp.csr_matrix(Mv.T), None]], format="csc")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", MatrixRankWarning)
                lu = splu(J)
            delta = lu.solve(-np.concatenate([F1, [F2]]))
        except (RuntimeError, MatrixRankWarning) as exc:
            raise SingularJacobian(f"bordered Jacobian singular: {exc}",
                                   make_state(GraphFunction(mesh, v), lam, params, kind, None, it, history)) from exc
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian("bordered solve produced non-finite values",
                                   make_state(GraphFunction(mesh, v), lam, params, kind, None, it, history))
        t = 1.0
        while True:
            v1 = v + t * delta[:-1]
            l1 = lam + t * delta[-1]
            G1, G2, r1 = _residual(v1, l1, params, mesh)
            if r1 < (1 - 1e-4 * t) * r or t < 1.0 / 64:
                break
            t *= 0.5
        if not (np.all(np.isfinite(v1)) and math.isfinite(l1) and math.isfinite(r1)):
            raise Diverged("Newton produced non-finite iterates",
                           make_state(GraphFunction(mesh, v), lam, params, kind, None, it, history))
        v, lam, F1, F2, r = v1, l1, G1, G2, r1
        history.append(r)
        it += 1
    return make_state(GraphFunction(mesh, v), lam, params, kind, morse_cfg, it, history)
