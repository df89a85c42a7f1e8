"""Projected descent on the mass sphere.

Steps are taken along the Riesz representative of the constrained gradient
in the inner product ``P = K + alpha M`` (a discrete H^1 metric), projected
onto the tangent space of the sphere.  The plain L^2 representative
``M^{-1} g`` needs steps of order ``h^2``; the H^1 one admits ``sigma ~ 1``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.sparse.linalg import splu

from ..energy import EnergyParams, MorseConfig, dual_norm, energy, gradient, lagrange_multiplier
from ..mesh import integrate_power
from ..errors import InvalidParameter, MaxItersExceeded
from ..mesh import GraphFunction, Mesh
from .state import BoundState, make_state

ARMIJO = 1e-4
MIN_STEP = 1e-14
# relative size of energy differences treated as rounding noise
ROUNDING = 64 * np.finfo(float).eps


def renormalize(values: np.ndarray, mesh: Mesh, mu: float, positive: bool = True) -> GraphFunction:
    v = np.abs(values) if positive else np.asarray(values, dtype=float)
    m = float(v @ (mesh.M @ v))
    if not m > 0:
        raise InvalidParameter("cannot renormalize a function with zero mass")
    return GraphFunction(mesh, v * math.sqrt(mu / m))


class SobolevStepper:
    """Tangent-projected H^1 descent directions for a fixed mesh."""

    def __init__(self, mesh: Mesh, alpha: float = 1.0):
        self.mesh = mesh
        self.alpha = float(alpha)
        self._lu = splu((mesh.K + self.alpha * mesh.M).tocsc())

    def _inner(self, x, y) -> float:
        return float(x @ (self.mesh.K @ y) + self.alpha * (x @ (self.mesh.M @ y)))

    def direction(self, u: GraphFunction, g_c: np.ndarray, exclude: np.ndarray | None = None) -> np.ndarray:
        """Riesz representative of ``g_c`` projected onto the sphere tangent.

        ``exclude`` is an additional direction removed P-orthogonally.
        """
        Mu = self.mesh.M @ u.values
        b = self._lu.solve(np.asarray(Mu))

        def tangent(x):
            return x - (Mu @ x) / (Mu @ b) * b

        d = tangent(self._lu.solve(np.asarray(g_c)))
        if exclude is not None:
            t = tangent(np.asarray(exclude, dtype=float))
            tt = self._inner(t, t)
            if tt > 0:
                d = d - self._inner(d, t) / tt * t
        return d

    def step(self, u: GraphFunction, params: EnergyParams, sigma: float, e0: float | None = None,
             positive: bool = True, rtol: float = 1e-8, max_move: float | None = None,
             exclude: np.ndarray | None = None):
        """One backtracked descent step.

        Returns ``(u_new, e_new, sigma_used, g_c, lam)``; ``u_new`` is ``u``
        itself when no acceptable step was found above ``MIN_STEP``.  With
        ``max_move`` the step is first shortened so that the H^1 length of
        ``sigma * d`` does not exceed it.

        Sufficient decrease is tested on the energy change with the kinetic
        part evaluated as ``(v1 - v0)^T K (v1 + v0) / 2``.  Once that change is
        at the rounding level of the energy itself, a step is accepted when it
        lowers the constrained gradient norm instead.
        """
        mesh = self.mesh
        lam = lagrange_multiplier(u, params, rtol)
        g_c = gradient(u, params) + lam * (mesh.M @ u.values)
        d = self.direction(u, g_c, exclude)
        slope = float(g_c @ d)
        v0 = u.values
        pot0 = params.rho / params.p * integrate_power(u, params.p) if params.rho else 0.0
        if e0 is None:
            e0 = energy(u, params)
        noise = ROUNDING * (abs(e0) + 2.0 * pot0 + 1e-300)
        gn0 = None
        s = sigma
        if max_move is not None:
            dn = math.sqrt(max(float(d @ (self.mesh.K @ d) + d @ (self.mesh.M @ d)), 0.0))
            if dn > 0:
                s = min(s, max_move / dn)
        while s >= MIN_STEP:
            cand = renormalize(v0 - s * d, mesh, params.mu, positive)
            v1 = cand.values
            pot1 = params.rho / params.p * integrate_power(cand, params.p) if params.rho else 0.0
            de = 0.5 * float((v1 - v0) @ (mesh.K @ (v1 + v0))) - (pot1 - pot0)
            if de <= -ARMIJO * s * slope:
                return cand, energy(cand, params), s, g_c, lam
            if de <= noise:
                if gn0 is None:
                    gn0 = dual_norm(g_c, mesh)
                if constrained_gradient_norm(cand, params, rtol) < gn0:
                    return cand, energy(cand, params), s, g_c, lam
            s *= 0.5
        return u, e0, 0.0, g_c, lam


def constrained_gradient_norm(u: GraphFunction, params: EnergyParams, rtol: float = 1e-8) -> float:
    lam = lagrange_multiplier(u, params, rtol)
    return dual_norm(gradient(u, params) + lam * (u.mesh.M @ u.values), u.mesh)


def normalized_gradient_flow(u0: GraphFunction, params: EnergyParams, step: float = 1.0,
                             tol: float = 1e-9, max_iters: int = 5000, alpha: float | None = None,
                             positive: bool = True, morse_cfg: MorseConfig | None = None) -> BoundState:
    """Energy-decreasing projected flow until ``||g_c||_{M^-1} <= tol``.

    Parameters
    ----------
    u0 : GraphFunction
        Start; renormalized to mass ``mu`` (and replaced by ``|u0|`` when
        ``positive``).
    step : float
        Initial step; adapted by backtracking and growth by 1.5 after success.
    alpha : float, optional
        Fixed shift of the H^1 metric ``K + alpha M``.  By default the shift
        follows ``max(1, lam(u))`` and the metric is refactorized whenever
        that drifts by more than a factor of two.

    Raises
    ------
    MaxItersExceeded
        With the last iterate as ``state``.
    """
    mesh = u0.mesh
    u = renormalize(u0.values, mesh, params.mu, positive)
    adaptive = alpha is None
    stepper = SobolevStepper(mesh, max(1.0, lagrange_multiplier(u, params)) if adaptive else alpha)
    e = energy(u, params)
    sigma = step
    history = []
    for it in range(max_iters + 1):
        lam = lagrange_multiplier(u, params)
        g_c = gradient(u, params) + lam * (mesh.M @ u.values)
        gn = dual_norm(g_c, mesh)
        history.append((e, gn))
        if gn <= tol:
            return make_state(u, lam, params, "minimizer", morse_cfg, it, history)
        if it == max_iters:
            break
        if adaptive and not 0.5 <= max(1.0, lam) / stepper.alpha <= 2.0:
            stepper = SobolevStepper(mesh, max(1.0, lam))
        u_new, e_new, used, _, _ = stepper.step(u, params, sigma, e, positive)
        if used == 0.0:
            break  # no further decrease representable in floating point
        u, e = u_new, e_new
        sigma = min(used * 1.5, 4.0 * step)
    state = make_state(u, lam, params, "minimizer", None, it, history)
    raise MaxItersExceeded(f"gradient flow stopped at ||g_c|| = {gn:.3e} > {tol:.1e} after {it} steps", state)
