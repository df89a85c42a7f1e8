"""Bound-state solvers: constant branch, descent, mountain pass, Newton and continuation."""
from .continuation import ContinuationTrace, StepStats, TraceEntry, continuation, mu_halvings, rho_schedule
from .descent import centred_soliton_state, graded_interval_mesh, mu_descent, path_positions
from .flow import constrained_gradient_norm, normalized_gradient_flow, renormalize
from .mountain_pass import (MountainPassConfig, MountainPassResult, build_bump, default_bump_center,
                            mountain_pass, relative_gradient_norm)
from .newton import newton_refine
from .state import (BoundState, Check, Residuals, Threshold, VerificationReport, constant_energy,
                    constant_state, make_state, mass_threshold, verify_solution)

__all__ = [
    "BoundState", "Check", "ContinuationTrace", "MountainPassConfig", "MountainPassResult", "Residuals",
    "StepStats", "Threshold", "TraceEntry", "VerificationReport", "build_bump", "centred_soliton_state",
    "constant_energy", "constant_state", "constrained_gradient_norm", "continuation", "default_bump_center",
    "graded_interval_mesh", "make_state", "mass_threshold", "mountain_pass", "mu_descent", "mu_halvings",
    "newton_refine", "normalized_gradient_flow", "path_positions", "relative_gradient_norm", "renormalize",
    "rho_schedule", "verify_solution",
]
