"""Mass descent toward concentration on a graded interval.

As the mass decreases the single peak of the state narrows like
``lam^{-1/2}``, with ``lam`` growing like ``mu^{1/(2/(p-2) - 1/2)}``.  No
fixed mesh can follow this over several halvings: it either fails to
resolve the final peak or, at the first steps, puts nodes so close that
second differences drown in rounding.  Every step therefore rebuilds a
path graph graded toward the peak, with finest spacing tied to the
predicted width, and transfers the state by the self-similar rescaling of
a single soliton about its peak.
"""
from __future__ import annotations

import math

import numpy as np

from ..energy import EnergyParams, MorseConfig
from ..errors import InvalidParameter
from ..graph import EdgeCoordinate, MetricGraph, graded_path_lengths, standard_graph
from ..mesh import GraphFunction, Mesh, build_mesh
from .continuation import ContinuationTrace, continuation, mu_halvings
from .newton import newton_refine
from .state import BoundState

DEFAULT_RESOLUTION = 64.0  # finest spacing = width / resolution
DEFAULT_GROWTH = 1.05
DEFAULT_REFINE = math.sqrt(2.0)  # resolution factor per halving of the mass


def _is_path(g: MetricGraph) -> bool:
    n = len(g.edges)
    return all(e.id == f"e{i}" and e.a == f"v{i}" and e.b == f"v{i + 1}" for i, e in enumerate(g.edges)) and n > 0


def path_positions(mesh: Mesh) -> np.ndarray:
    """Arclength position of every DOF on a graph built by ``standard_graph("path", ...)``."""
    g = mesh.graph
    if not _is_path(g):
        raise InvalidParameter("positions are only defined on a path graph v0 - v1 - ... - vk")
    x = np.empty(mesh.n_dofs)
    offset = 0.0
    for k, e in enumerate(g.edges):
        x[mesh.edge_dofs[k]] = offset + mesh.edge_coordinates(k)
        offset += e.length
    return x


def graded_interval_mesh(length: float, finest: float, growth: float = DEFAULT_GROWTH) -> Mesh:
    """Path graph of total ``length`` refined geometrically toward its midpoint, two elements per edge."""
    lengths = graded_path_lengths(length, 2.0 * finest, growth)
    g = standard_graph("path", lengths)
    return build_mesh(g, max(lengths))


def midpoint(mesh: Mesh) -> EdgeCoordinate:
    """Coordinate of the middle vertex of a graded interval."""
    k = len(mesh.graph.edges) // 2
    return EdgeCoordinate(f"e{k}", 0.0)


def width_exponent(p: float) -> float:
    """``c`` in ``mu ~ lam^c`` for line solitons: ``2/(p-2) - 1/2``."""
    return 2.0 / (p - 2.0) - 0.5


def self_similar_predictor(resolution: float = DEFAULT_RESOLUTION, growth: float = DEFAULT_GROWTH,
                           refine: float = 1.0, mu0: float | None = None):
    """Predictor for ``continuation`` in ``mu`` on a graded interval.

    The multiplier follows the soliton law, the profile is rescaled about
    its maximum and sampled on a new mesh whose finest spacing is the
    predicted width divided by ``resolution * refine^log2(mu0/mu)``.
    """
    def predict(state: BoundState, mu: float) -> tuple[GraphFunction, float]:
        mesh = state.mesh
        p = state.params.p
        x = path_positions(mesh)
        order = np.argsort(x, kind="stable")
        xs, us = x[order], state.u.values[order]
        lam = state.lam * (mu / state.params.mu) ** (1.0 / width_exponent(p))
        ratio = lam / state.lam
        length = mesh.graph.total_length
        res = resolution if mu0 is None else resolution * refine ** math.log2(mu0 / mu)
        new = graded_interval_mesh(length, 1.0 / (math.sqrt(lam) * res), growth)
        xc = xs[int(np.argmax(us))]
        y = path_positions(new)
        vals = ratio ** (1.0 / (p - 2.0)) * np.interp(xc + math.sqrt(ratio) * (y - 0.5 * length), xs, us)
        return GraphFunction(new, vals), lam

    return predict


def mu_descent(initial: BoundState, halvings: int = 6, resolution: float = DEFAULT_RESOLUTION,
               growth: float = DEFAULT_GROWTH, refine: float = DEFAULT_REFINE, newton_tol: float = 1e-10,
               morse_cfg: MorseConfig | None = None) -> ContinuationTrace:
    """Continue ``initial`` (a single-peak state on a graded interval) through ``mu 2^-j``, ``j = 1..halvings``.

    Nodes per peak width grow by ``refine`` per halving, so that later
    states are closer to the continuum problem than earlier ones.  With
    ``refine = 1`` every step solves the same rescaled discrete problem.
    """
    if not _is_path(initial.mesh.graph):
        raise InvalidParameter("mass descent runs on a graded interval (a path graph)")
    return continuation(initial, mu_halvings(initial.params.mu, halvings), "mu", newton_tol=newton_tol,
                        morse_cfg=morse_cfg, predictor=self_similar_predictor(resolution, growth, refine, initial.params.mu))


def centred_soliton_state(length: float, params: EnergyParams, resolution: float = DEFAULT_RESOLUTION,
                          growth: float = DEFAULT_GROWTH, tol: float = 1e-10) -> BoundState:
    """Single-peak state of mass ``params.mu`` centred on a graded interval.

    Newton is started from the line soliton of that mass.
    """
    from ..blowup import soliton_line, soliton_guess

    amp = params.rho ** (-1.0 / (params.p - 2.0))
    lam = soliton_line(params.p).lam_for_mass(params.mu / amp ** 2)
    mesh = graded_interval_mesh(length, 1.0 / (math.sqrt(lam) * resolution), growth)
    u, lam = soliton_guess(mesh, params, midpoint(mesh))
    return newton_refine(u, lam, params, tol)
