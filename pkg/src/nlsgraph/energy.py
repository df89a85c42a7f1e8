"""Discrete constrained variational calculus for

    E_rho(u) = 1/2 int |u'|^2 - rho/p int |u|^p,   int u^2 = mu.

All quantities are exact derivatives of the discrete functional
``1/2 u^T K u - rho/p Q_p(u)`` where ``Q_p`` is the Gauss-quadrature power
integral, so identities that hold for the continuous problem hold for
discrete critical points up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

from .errors import InvalidParameter, MassMismatch, NoConvergence
from .mesh import GraphFunction, integrate_power, nonlinear_load, weight_operator

DEGENERACY_GAP = 1e-10
DENSE_LIMIT = 6000


@dataclass(frozen=True)
class EnergyParams:
    """Exponent ``p > 6``, homotopy weight ``rho in [1/2, 1]``, mass ``mu > 0``.

    ``rho = 0`` is also accepted (pure kinetic energy) for diagnostics.
    """

    p: float
    rho: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 6):
            raise InvalidParameter(f"p must be > 6 (mass supercritical), got {self.p}")
        if not (self.rho == 0.0 or 0.5 <= self.rho <= 1.0):
            raise InvalidParameter(f"rho must lie in [1/2, 1] (or be 0), got {self.rho}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise InvalidParameter(f"mu must be positive, got {self.mu}")

    def replace(self, **kw) -> "EnergyParams":
        return EnergyParams(**{"p": self.p, "rho": self.rho, "mu": self.mu, **kw})


@dataclass(frozen=True)
class MorseConfig:
    theta: float = 1e-8
    tol: float = 1e-10
    k_max: int = 8

    def __post_init__(self):
        if self.theta < 0:
            raise InvalidParameter("theta must be >= 0")


class MorseIndex(NamedTuple):
    unconstrained: int
    constrained: int


class StrongResidual(NamedTuple):
    interior_norm: float
    kirchhoff_defects: dict


def kinetic(u: GraphFunction) -> float:
    """``int |u'|^2``."""
    v = u.values
    return float(v @ (u.mesh.K @ v))


def mass(u: GraphFunction) -> float:
    v = u.values
    return float(v @ (u.mesh.M @ v))


def energy(u: GraphFunction, params: EnergyParams) -> float:
    e = 0.5 * kinetic(u)
    if params.rho:
        e -= params.rho / params.p * integrate_power(u, params.p)
    return e


def gradient(u: GraphFunction, params: EnergyParams) -> np.ndarray:
    """Dual vector ``g`` with ``g . phi = E_rho'(u) phi``."""
    g = u.mesh.K @ u.values
    if params.rho:
        g = g - params.rho * nonlinear_load(u, params.p - 2)
    return np.asarray(g)


def _check_mass(u: GraphFunction, params: EnergyParams, rtol: float) -> float:
    m = mass(u)
    if abs(m - params.mu) > rtol * params.mu:
        raise MassMismatch(f"mass {m!r} differs from mu={params.mu!r} by more than {rtol:g} relative")
    return m


def lagrange_multiplier(u: GraphFunction, params: EnergyParams, rtol: float = 1e-8) -> float:
    """``lambda(u) = -E_rho'(u) u / mu = (rho int |u|^p - int |u'|^2) / mu``.

    The actual discrete mass is used as the denominator once it is confirmed
    to match ``mu`` within ``rtol``.
    """
    m = _check_mass(u, params, rtol)
    pot = params.rho * integrate_power(u, params.p) if params.rho else 0.0
    return (pot - kinetic(u)) / m


def constrained_gradient(u: GraphFunction, params: EnergyParams, rtol: float = 1e-8) -> np.ndarray:
    """``g + lambda(u) M u``; orthogonal to ``u`` by construction."""
    lam = lagrange_multiplier(u, params, rtol)
    return gradient(u, params) + lam * (u.mesh.M @ u.values)


def dual_norm(g: np.ndarray, mesh) -> float:
    """``sqrt(g^T M^{-1} g)``: L2 norm of the Riesz representative of ``g``."""
    return float(math.sqrt(max(g @ mesh.M_lu.solve(np.asarray(g)), 0.0)))


def hessian_matrix(u: GraphFunction, lam: float, params: EnergyParams):
    """Sparse ``H = K + lam M - (p-1) rho W(u)``."""
    mesh = u.mesh
    H = mesh.K + lam * mesh.M
    if params.rho:
        H = H - (params.p - 1) * params.rho * weight_operator(u, params.p - 2)
    return H.tocsr()


def hessian_form(phi: GraphFunction, u: GraphFunction, lam: float, params: EnergyParams) -> float:
    """``Q(phi; u) = int |phi'|^2 + (lam - (p-1) rho |u|^{p-2}) phi^2``."""
    f = phi.values
    mesh = u.mesh
    q = f @ (mesh.K @ f) + lam * (f @ (mesh.M @ f))
    if params.rho:
        q -= (params.p - 1) * params.rho * (f @ (weight_operator(u, params.p - 2) @ f))
    return float(q)


def _tangent_basis(c: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``{x : c . x = 0}``."""
    Q, _ = np.linalg.qr(c.reshape(-1, 1), mode="complete")
    return Q[:, 1:]


def hessian_spectrum(u: GraphFunction, lam: float, params: EnergyParams, k: int = 8,
                     constrained: bool = False) -> np.ndarray:
    """Lowest ``k`` eigenvalues of the pencil ``(H, M)``.

    With ``constrained`` the pencil is compressed to the tangent space
    ``{phi : phi^T M u = 0}`` of the mass sphere.
    """
    mesh = u.mesh
    n = mesh.n_dofs
    if n > DENSE_LIMIT:
        raise NoConvergence(f"dense Hessian spectrum limited to {DENSE_LIMIT} DOFs, got {n}")
    H = hessian_matrix(u, lam, params).toarray()
    M = mesh.M.toarray()
    if constrained:
        Z = _tangent_basis(M @ u.values)
        H = Z.T @ H @ Z
        M = Z.T @ M @ Z
        H = 0.5 * (H + H.T)
        M = 0.5 * (M + M.T)
    k = min(k, H.shape[0])
    try:
        return la.eigh(H, M, eigvals_only=True, subset_by_index=[0, k - 1])
    except la.LinAlgError as exc:
        raise NoConvergence(f"Hessian eigensolve failed: {exc}") from exc


def morse_index(u: GraphFunction, lam: float, params: EnergyParams,
                cfg: MorseConfig = MorseConfig()) -> MorseIndex:
    """Counts of pencil eigenvalues strictly below ``-theta``.

    Eigenvalues within ``1e-10`` of ``-theta`` are treated as non-negative.
    Counts saturate at ``cfg.k_max``.
    """
    cut = -cfg.theta - DEGENERACY_GAP
    free = hessian_spectrum(u, lam, params, cfg.k_max)
    tang = hessian_spectrum(u, lam, params, cfg.k_max, constrained=True)
    return MorseIndex(int(np.sum(free < cut)), int(np.sum(tang < cut)))


def constrained_hessian_min_eig(u: GraphFunction, lam: float, params: EnergyParams) -> float:
    """Smallest eigenvalue of the Hessian pencil on the tangent space of the mass sphere."""
    return float(hessian_spectrum(u, lam, params, k=1, constrained=True)[0])


def nodal_residual(u: GraphFunction, lam: float, params: EnergyParams) -> np.ndarray:
    """Weak residual ``K u + lam M u - rho N(u)`` (one entry per DOF)."""
    mesh = u.mesh
    r = mesh.K @ u.values + lam * (mesh.M @ u.values)
    if params.rho:
        r = r - params.rho * nonlinear_load(u, params.p - 2)
    return np.asarray(r)


def strong_residual(u: GraphFunction, lam: float, params: EnergyParams) -> StrongResidual:
    """Pointwise defects of ``-u'' + lam u = rho |u|^{p-2} u`` and of Kirchhoff.

    At an interior node with spacing ``h`` the weak residual divided by the
    hat-function integral ``h`` is the second difference ``-(u_{i-1} - 2u_i +
    u_{i+1})/h^2`` plus the mass-consistent lower-order terms.  At a vertex
    the negated weak residual is ``sum_e [(u_e1 - u_v)/h_e - h_e/2 u''_e(v)]``:
    the sum of one-sided outer derivatives with their half-cell correction.
    """
    mesh = u.mesh
    r = nodal_residual(u, lam, params)
    nv = mesh.n_vertices
    interior = r[nv:] / mesh.lumped[nv:]
    norm = float(np.max(np.abs(interior))) if interior.size else 0.0
    defects = {v: float(-r[i]) for i, v in enumerate(mesh.graph.vertices)}
    return StrongResidual(norm, defects)
