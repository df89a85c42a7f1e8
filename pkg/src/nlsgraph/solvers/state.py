"""Bound states, the constant branch and a posteriori verification."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import (EnergyParams, MorseConfig, MorseIndex, dual_norm, energy, integrate_power,
                      kinetic, mass, morse_index, nodal_residual, strong_residual)
from ..graph import MetricGraph
from ..mesh import GraphFunction, Mesh, build_mesh, nonlinear_load
from ..spectral import friedlander_bound, second_eigenpair

log = logging.getLogger(__name__)

POSITIVITY_RTOL = 1e-10


@dataclass(frozen=True)
class Residuals:
    gradient: float  # dual norm of K u + lam M u - rho N(u)
    interior: float  # max nodal strong residual
    kirchhoff: dict  # vertex -> signed defect


@dataclass(frozen=True)
class BoundState:
    """A critical point ``u`` of the constrained energy with multiplier ``lam``."""

    u: GraphFunction
    lam: float
    params: EnergyParams
    energy: float
    mass: float
    residuals: Residuals
    morse: MorseIndex | None = None
    kind: str = "solution"
    iterations: int = 0
    history: tuple = field(default=(), repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.u.mesh

    def is_positive(self) -> bool:
        v = self.u.values
        return bool(v.min() >= -POSITIVITY_RTOL * max(v.max(), 0.0) and v.max() > 0)


def make_state(u: GraphFunction, lam: float, params: EnergyParams, kind: str = "solution",
               morse_cfg: MorseConfig | None = None, iterations: int = 0, history=()) -> BoundState:
    r = nodal_residual(u, lam, params)
    sr = strong_residual(u, lam, params)
    res = Residuals(dual_norm(r, u.mesh), sr.interior_norm, sr.kirchhoff_defects)
    mi = morse_index(u, lam, params, morse_cfg) if morse_cfg is not None else None
    return BoundState(u, float(lam), params, energy(u, params), mass(u), res, mi, kind,
                      iterations, tuple(history))


def constant_state(mesh: Mesh, params: EnergyParams, morse_cfg: MorseConfig | None = None) -> BoundState:
    """``kappa = (mu / l)^{1/2}`` with ``lam = rho kappa^{p-2}``.

    The discrete total length ``1^T M 1`` is used so the mass is exact.
    """
    length = float(mesh.lumped.sum())
    kappa = math.sqrt(params.mu / length)
    lam = params.rho * kappa ** (params.p - 2)
    return make_state(mesh.constant(kappa), lam, params, "constant", morse_cfg)


def constant_energy(length: float, params: EnergyParams) -> float:
    """``-(rho/p) mu^{p/2} l^{1-p/2}``: energy of the constant state of mass ``mu``."""
    return -params.rho / params.p * params.mu ** (params.p / 2) * length ** (1 - params.p / 2)


@dataclass(frozen=True)
class Threshold:
    mu1: float
    bound: float
    lambda2: float
    multiplicity: int


def mass_threshold(g: MetricGraph | Mesh, p: float, h_target: float | None = None,
                   tol: float = 1e-10, seed: int = 0) -> Threshold:
    """Mass ``mu_1 = l (lambda_2/(p-2))^{2/(p-2)}`` where the constant loses stability.

    ``bound`` is the lower estimate obtained from ``lambda_2 >= pi^2/l^2``.
    P1 eigenvalues are Rayleigh-Ritz upper bounds, so ``mu1 >= bound`` holds
    for every mesh; a violation is logged.
    """
    mesh = g if isinstance(g, Mesh) else build_mesh(g, h_target)
    graph = mesh.graph
    EnergyParams(p)  # validates p
    lam2, _, mult = second_eigenpair(mesh, tol=tol, seed=seed)
    ell = graph.total_length
    mu1 = ell * (lam2 / (p - 2)) ** (2 / (p - 2))
    bound = ell * (friedlander_bound(graph) / (p - 2)) ** (2 / (p - 2))
    if mu1 < bound * (1 - 1e-12):
        log.warning("mu_1 = %.12g below its lower bound %.12g", mu1, bound)
    return Threshold(mu1, bound, lam2, mult)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        return f"{self.name} {self.value!r} {self.tolerance!r} {'PASS' if self.passed else 'FAIL'}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        return "\n".join(c.line() for c in self.checks) + "\n"


def _rel(a: float, b: float, scale: float) -> float:
    return abs(a - b) / max(scale, 1e-300)


def verify_solution(state: BoundState, identity_rtol: float = 1e-6, mass_rtol: float = 1e-8,
                    residual_rtol: float = 1e-8, morse_cfg: MorseConfig | None = None) -> VerificationReport:
    """Recompute every certificate of ``state`` from its nodal values.

    Strong residuals are scaled by ``|lam| max|u| + rho max|u|^{p-1}``; the
    Kirchhoff defects additionally by the vertex hat-function integral.
    Morse bounds are only checked for mountain-pass states; indices already
    stored on the state are reused unless ``morse_cfg`` is given.
    """
    u, lam, P = state.u, state.lam, state.params
    mesh = u.mesh
    v = u.values
    umax = float(np.max(np.abs(v)))
    scale = abs(lam) * umax + P.rho * umax ** (P.p - 1) + 1e-300
    checks = []

    m = mass(u)
    checks.append(Check("mass", _rel(m, P.mu, P.mu), mass_rtol, _rel(m, P.mu, P.mu) <= mass_rtol))

    sr = strong_residual(u, lam, P)
    val = sr.interior_norm / scale
    checks.append(Check("strong_residual", val, residual_rtol, val <= residual_rtol))
    kd = max((abs(d) / mesh.lumped[i] for i, d in enumerate(sr.kirchhoff_defects.values())), default=0.0)
    kd = float(kd / scale)
    checks.append(Check("kirchhoff", kd, residual_rtol, kd <= residual_rtol))

    positive = v.min() >= -POSITIVITY_RTOL * umax and umax > 0
    checks.append(Check("lambda_positive", lam, 0.0, bool(lam > 0 or not positive)))

    # quadrature-consistent forms: 1^T M u and 1^T N(u)
    int_u = float(mesh.lumped @ v)
    load = float(nonlinear_load(u, P.p - 2).sum()) * P.rho
    d_val = _rel(lam * int_u, load, max(abs(load), abs(lam * int_u)))
    checks.append(Check("l1_identity", d_val, identity_rtol, d_val <= identity_rtol))

    kin = kinetic(u)
    pot = P.rho * integrate_power(u, P.p)
    e_val = _rel(kin + lam * m, pot, max(abs(pot), kin + abs(lam) * m))
    checks.append(Check("pohozaev", e_val, identity_rtol, e_val <= identity_rtol))

    E = energy(u, P)
    rhs = (0.5 - 1 / P.p) * kin - lam * P.mu / P.p
    f_val = _rel(rhs, E, max(abs(E), (0.5 - 1 / P.p) * kin, abs(lam) * P.mu / P.p))
    checks.append(Check("energy_identity", f_val, identity_rtol, f_val <= identity_rtol))

    if state.kind == "mountain-pass":
        mi = state.morse if state.morse is not None and morse_cfg is None else \
            morse_index(u, lam, P, morse_cfg or MorseConfig())
        checks.append(Check("morse_constrained", float(mi.constrained), 1.0, mi.constrained <= 1))
        checks.append(Check("morse_unconstrained", float(mi.unconstrained), 2.0, mi.unconstrained <= 2))
    return VerificationReport(tuple(checks))
