"""Parameter continuation of a bound state in ``rho`` or ``mu``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..energy import MorseConfig, lagrange_multiplier
from ..errors import InvalidParameter, SolverFailure, StepFloorReached
from .flow import renormalize
from .newton import newton_refine
from .state import BoundState, VerificationReport, constant_state, verify_solution

log = logging.getLogger(__name__)

PARAMETERS = ("rho", "mu")


@dataclass(frozen=True)
class TraceEntry:
    value: float
    state: BoundState
    report: VerificationReport
    step: float  # parameter increment that produced this entry (0 for the initial state)


@dataclass(frozen=True)
class StepStats:
    accepted: int = 0
    rejected: int = 0
    smallest_step: float = math.inf
    newton_iterations: int = 0


@dataclass(frozen=True)
class ContinuationTrace:
    parameter: str
    entries: tuple[TraceEntry, ...]
    stats: StepStats = field(default_factory=StepStats)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    @property
    def states(self) -> list[BoundState]:
        return [e.state for e in self.entries]

    @property
    def final(self) -> BoundState:
        return self.entries[-1].state

    def __len__(self) -> int:
        return len(self.entries)


def _predict(entries: list[TraceEntry], target: float, parameter: str, secant: bool):
    """Initial guess ``(u, lam)`` at ``target``: secant extrapolation or the last state."""
    last = entries[-1]
    s = last.state
    v = s.u.values
    lam = s.lam
    if secant and len(entries) >= 2:
        prev = entries[-2]
        if prev.state.mesh is s.mesh:
            t = (target - last.value) / (last.value - prev.value)
            v = v + t * (v - prev.state.u.values)
            lam = lam + t * (lam - prev.state.lam)
    params = s.params.replace(**{parameter: target})
    u = renormalize(v, s.mesh, params.mu, positive=False)
    if not secant:
        lam = lagrange_multiplier(u, params)
    return u, lam, params


def _acceptable(state: BoundState, report: VerificationReport, initial: BoundState) -> str | None:
    if not report.passed:
        return "verification failed: " + ", ".join(c.name for c in report.checks if not c.passed)
    if initial.is_positive() and not state.is_positive():
        return "lost positivity"
    if initial.kind != "constant":
        kappa = constant_state(state.mesh, state.params).u.values[0]
        if np.max(np.abs(state.u.values - kappa)) <= 1e-3 * kappa:
            return "collapsed onto the constant state"
    return None


def continuation(initial: BoundState, schedule: Sequence[float], parameter: str = "rho",
                 newton_tol: float = 1e-10, min_fraction: float = 1.0 / 1024,
                 morse_cfg: MorseConfig | None = None, max_newton: int = 30,
                 predictor: Callable | None = None) -> ContinuationTrace:
    """Follow ``initial`` through the parameter values in ``schedule``.

    Each target is approached from the last accepted state by Newton,
    started from a secant predictor and then from the last state itself.
    When both fail, or the result fails ``verify_solution``, loses
    positivity or falls onto the constant state, the step is halved.
    Halving stops at ``min_fraction`` of the scheduled step.

    Parameters
    ----------
    initial
        Converged state at the starting parameter value.
    schedule
        Targets, strictly monotone and moving away from the starting value.
    parameter
        ``"rho"`` or ``"mu"``.
    morse_cfg
        Morse indices are computed for every accepted state when given.
    predictor
        Optional ``predictor(state, target) -> (u, lam)`` tried before the
        built-in guesses.  ``u`` may live on a new mesh, which lets the
        caller remesh as the state changes scale.

    Raises
    ------
    StepFloorReached
        No acceptable state within the step floor; ``state`` is the last
        accepted one.
    """
    if parameter not in PARAMETERS:
        raise InvalidParameter(f"parameter must be one of {PARAMETERS}, got {parameter!r}")
    start = float(getattr(initial.params, parameter))
    values = [start] + [float(x) for x in schedule]
    diffs = np.diff(values)
    if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise InvalidParameter("schedule must be strictly monotone and start past the initial value")

    first = initial if initial.morse is not None or morse_cfg is None else \
        newton_refine(initial.u, initial.lam, initial.params, newton_tol, kind=initial.kind, morse_cfg=morse_cfg)
    entries = [TraceEntry(start, first, verify_solution(first, morse_cfg=morse_cfg), 0.0)]
    accepted = rejected = iters = 0
    smallest = math.inf
    for target in values[1:]:
        span = target - entries[-1].value
        floor = abs(span) * min_fraction
        step = span
        while entries[-1].value != target:
            here = entries[-1].value
            goal = target if abs(target - here) <= abs(step) * (1 + 1e-12) else here + step
            result, why = None, "Newton failed"
            guesses = [None, True, False] if predictor is not None else [True, False]
            for secant in guesses:
                if secant is None:
                    u, lam = predictor(entries[-1].state, goal)
                    params = entries[-1].state.params.replace(**{parameter: goal})
                    u = renormalize(u.values, u.mesh, params.mu, positive=False)
                else:
                    u, lam, params = _predict(entries, goal, parameter, secant)
                try:
                    cand = newton_refine(u, lam, params, newton_tol, max_newton, kind=initial.kind,
                                         morse_cfg=morse_cfg)
                except SolverFailure as exc:
                    why = str(exc)
                    continue
                report = verify_solution(cand, morse_cfg=morse_cfg)
                why = _acceptable(cand, report, initial)
                if why is None:
                    result = (cand, report)
                    break
            if result is None:
                rejected += 1
                step *= 0.5
                log.debug("%s step to %.6g rejected (%s); halving", parameter, goal, why)
                if abs(step) < floor:
                    raise StepFloorReached(
                        f"{parameter} continuation stalled at {here:.10g}: step below {floor:.3g} ({why})",
                        entries[-1].state)
                continue
            cand, report = result
            accepted += 1
            iters += cand.iterations
            smallest = min(smallest, abs(goal - here))
            entries.append(TraceEntry(goal, cand, report, goal - here))
            # grow again after a successful reduced step
            step = math.copysign(min(abs(2 * step), abs(span)), span)
    return ContinuationTrace(parameter, tuple(entries), StepStats(accepted, rejected, smallest, iters))


def rho_schedule(start: float = 0.5, stop: float = 1.0, steps: int = 5) -> list[float]:
    """Uniform grid from ``start`` (excluded) to ``stop`` (included)."""
    return [float(x) for x in np.linspace(start, stop, steps + 1)[1:]]


def mu_halvings(mu0: float, k: int = 6) -> list[float]:
    """``mu0 2^-j`` for ``j = 1..k``."""
    return [mu0 * 2.0 ** -j for j in range(1, k + 1)]
