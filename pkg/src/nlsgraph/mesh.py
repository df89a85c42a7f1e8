"""P1 finite elements on a metric graph.

Degrees of freedom are nodal values.  Vertices come first (in graph order),
then the interior nodes of each edge, edge by edge.  Every edge endpoint that
sits on a vertex maps to that vertex's single DOF, so continuity across
vertices is structural and the Kirchhoff condition is the natural boundary
condition of the weak form.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import ConflictingVertexValues, InvalidParameter
from .graph import EdgeCoordinate, MetricGraph


@dataclass(frozen=True, eq=False)
class Mesh:
    graph: MetricGraph
    counts: tuple[int, ...]
    edge_dofs: tuple[np.ndarray, ...]
    left: np.ndarray
    right: np.ndarray
    h: np.ndarray
    elem_edge: np.ndarray
    n_dofs: int

    @property
    def spacing(self) -> np.ndarray:
        return np.array([e.length / n for e, n in zip(self.graph.edges, self.counts)])

    @property
    def n_vertices(self) -> int:
        return len(self.graph.vertices)

    def edge_coordinates(self, k: int) -> np.ndarray:
        e = self.graph.edges[k]
        n = self.counts[k]
        s = np.arange(n + 1) * (e.length / n)
        s[-1] = e.length
        return s

    @cached_property
    def dof_coordinates(self) -> list[EdgeCoordinate]:
        """One representative ``EdgeCoordinate`` per DOF."""
        out: list[EdgeCoordinate | None] = [None] * self.n_dofs
        for k, e in enumerate(self.graph.edges):
            s = self.edge_coordinates(k)
            for dof, sk in zip(self.edge_dofs[k], s):
                if out[dof] is None:
                    out[dof] = EdgeCoordinate(e.id, float(sk))
        return out  # type: ignore[return-value]

    @cached_property
    def operators(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        return assemble_operators(self)

    @property
    def K(self) -> sp.csr_matrix:
        return self.operators[0]

    @property
    def M(self) -> sp.csr_matrix:
        return self.operators[1]

    @cached_property
    def M_lu(self):
        return splu(self.M.tocsc())

    @cached_property
    def lumped(self) -> np.ndarray:
        """Row sums of M, i.e. the integrals of the hat functions."""
        return np.asarray(self.M.sum(axis=1)).ravel()

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Node graph weighted by element length (for nodal distances)."""
        n = self.n_dofs
        a = sp.coo_matrix((self.h, (self.left, self.right)), shape=(n, n)).tocsr()
        b = sp.coo_matrix((self.h, (self.right, self.left)), shape=(n, n)).tocsr()
        # a two-element self-loop lists the same node pair in both directions
        return a.maximum(b).tocsr()

    def node_distances(self, sources) -> np.ndarray:
        from scipy.sparse.csgraph import dijkstra

        return dijkstra(self.adjacency, directed=False, indices=sources)

    def vertex_dof(self, v: str) -> int:
        return self.graph.vertex_index[v]

    def dof_at(self, x: EdgeCoordinate, tol: float = 1e-12) -> int:
        """DOF of the node located at ``x``; raises if ``x`` is not a node."""
        k = self.graph.edge_index[x.edge]
        s = self.edge_coordinates(k)
        j = int(np.argmin(np.abs(s - x.s)))
        if abs(s[j] - x.s) > tol * max(1.0, self.graph.edges[k].length):
            raise InvalidParameter(f"{x} is not a mesh node")
        return int(self.edge_dofs[k][j])

    def function(self, values) -> "GraphFunction":
        return GraphFunction(self, np.asarray(values, dtype=float))

    def constant(self, c: float) -> "GraphFunction":
        return GraphFunction(self, np.full(self.n_dofs, float(c)))


@dataclass(frozen=True, eq=False)
class GraphFunction:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_dofs,):
            raise InvalidParameter(f"expected {self.mesh.n_dofs} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("GraphFunction values must be finite")
        object.__setattr__(self, "values", v)

    def on_edge(self, edge_id: str) -> tuple[np.ndarray, np.ndarray]:
        k = self.mesh.graph.edge_index[edge_id]
        return self.mesh.edge_coordinates(k), self.values[self.mesh.edge_dofs[k]]

    def __call__(self, x: EdgeCoordinate) -> float:
        s, v = self.on_edge(x.edge)
        return float(np.interp(x.s, s, v))


def build_mesh(g: MetricGraph, h_target: float | None = None) -> Mesh:
    """Uniform P1 mesh per edge with ``n_e = max(2, ceil(l_e / h_target))``.

    ``h_target`` defaults to ``min_e l_e / 64``.
    """
    if h_target is None:
        h_target = min(e.length for e in g.edges) / 64.0
    if not (h_target > 0):
        raise InvalidParameter("h_target must be positive")
    counts = []
    for e in g.edges:
        # guard against ceil(1.0000000000000002) from representation error
        ratio = e.length / h_target
        n = math.ceil(ratio - 1e-9 * ratio)
        counts.append(max(2, n))

    nv = len(g.vertices)
    next_dof = nv
    edge_dofs = []
    lefts, rights, hs, owners = [], [], [], []
    for k, (e, n) in enumerate(zip(g.edges, counts)):
        dofs = np.empty(n + 1, dtype=np.int64)
        dofs[0] = g.vertex_index[e.a]
        dofs[-1] = g.vertex_index[e.b]
        dofs[1:-1] = np.arange(next_dof, next_dof + n - 1)
        next_dof += n - 1
        dofs.setflags(write=False)
        edge_dofs.append(dofs)
        lefts.append(dofs[:-1])
        rights.append(dofs[1:])
        hs.append(np.full(n, e.length / n))
        owners.append(np.full(n, k, dtype=np.int64))
    arrays = [np.ascontiguousarray(np.concatenate(a)) for a in (lefts, rights, hs, owners)]
    for a in arrays:
        a.setflags(write=False)
    return Mesh(g, tuple(counts), tuple(edge_dofs), *arrays, n_dofs=next_dof)


def mesh_h_target(mesh: Mesh) -> float:
    """An ``h_target`` for which ``build_mesh`` reproduces the element counts of ``mesh``."""
    lo, hi = 0.0, math.inf
    for e, n in zip(mesh.graph.edges, mesh.counts):
        lo = max(lo, e.length / n)
        if n > 2:
            hi = min(hi, e.length / (n - 1))
    if not lo < hi:
        raise InvalidParameter("element counts are not those of any uniform h_target")
    return lo


def _element_matrix(mesh: Mesh, d_ll, d_lr, d_rr) -> sp.csr_matrix:
    n = mesh.n_dofs
    L, R = mesh.left, mesh.right
    rows = np.concatenate([L, L, R, R])
    cols = np.concatenate([L, R, L, R])
    vals = np.concatenate([d_ll, d_lr, d_lr, d_rr])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    # exact symmetry regardless of duplicate summation order
    return ((A + A.T) * 0.5).tocsr()


def assemble_operators(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness ``K`` and consistent mass ``M``."""
    h = mesh.h
    K = _element_matrix(mesh, 1.0 / h, -1.0 / h, 1.0 / h)
    M = _element_matrix(mesh, h / 3.0, h / 6.0, h / 3.0)
    return K, M


def integrate_power(u: GraphFunction | np.ndarray, q: float, mesh: Mesh | None = None) -> float:
    """``int_G |u_h|^q dx`` by 3-point Gauss quadrature on every element."""
    mesh, vals = _unpack(u, mesh)
    if q < 1:
        raise InvalidParameter("q must be >= 1")
    return kernels.power_integral(vals, mesh.left, mesh.right, mesh.h, float(q))


def nonlinear_load(u, s: float, mesh: Mesh | None = None) -> np.ndarray:
    """``b_i = int |u_h|^s u_h phi_i``."""
    mesh, vals = _unpack(u, mesh)
    return kernels.nonlinear_load(vals, mesh.left, mesh.right, mesh.h, float(s), mesh.n_dofs)


def weight_operator(u, s: float, mesh: Mesh | None = None) -> sp.csr_matrix:
    """``W_ij = int |u_h|^s phi_i phi_j`` with the same quadrature."""
    mesh, vals = _unpack(u, mesh)
    wll, wlr, wrr = kernels.weight_entries(vals, mesh.left, mesh.right, mesh.h, float(s))
    return _element_matrix(mesh, wll, wlr, wrr)


def _unpack(u, mesh):
    if isinstance(u, GraphFunction):
        return u.mesh, u.values
    if mesh is None:
        raise InvalidParameter("a raw coefficient array needs its mesh")
    return mesh, np.ascontiguousarray(u, dtype=float)


def interpolate(f: Callable[[str, np.ndarray], np.ndarray], mesh: Mesh,
                tol: float = 1e-12) -> GraphFunction:
    """Nodal interpolant of ``f(edge_id, s)``.

    ``f`` is called once per edge with the array of node coordinates.  Values
    produced by different edges at a shared vertex must agree within ``tol``.
    """
    vals = np.full(mesh.n_dofs, np.nan)
    for k, e in enumerate(mesh.graph.edges):
        s = mesh.edge_coordinates(k)
        fv = np.broadcast_to(np.asarray(f(e.id, s), dtype=float), s.shape)
        dofs = mesh.edge_dofs[k]
        for end in (0, -1):
            d = dofs[end]
            if not np.isnan(vals[d]) and abs(vals[d] - fv[end]) > tol * max(1.0, abs(fv[end])):
                raise ConflictingVertexValues(
                    f"vertex DOF {d}: {vals[d]!r} vs {fv[end]!r} from edge {e.id!r}"
                )
        vals[dofs] = fv
    return GraphFunction(mesh, vals)


# --- CSV ------------------------------------------------------------------------

def write_function_csv(u: GraphFunction, path) -> None:
    """Columns ``edge,s,value``; vertex values repeat on every incident edge."""
    mesh = u.mesh
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge", "s", "value"])
        for k, e in enumerate(mesh.graph.edges):
            s = mesh.edge_coordinates(k)
            for sk, d in zip(s, mesh.edge_dofs[k]):
                w.writerow([e.id, repr(float(sk)), repr(float(u.values[d]))])


def read_function_csv(path, mesh: Mesh, tol: float = 1e-12) -> GraphFunction:
    rows: dict[str, list[tuple[float, float]]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["edge"], []).append((float(row["s"]), float(row["value"])))
    table = {eid: np.array(sorted(v)) for eid, v in rows.items()}

    def f(eid, s):
        if eid not in table:
            raise InvalidParameter(f"edge {eid!r} missing from {path}")
        t = table[eid]
        if len(t) != len(s) or np.max(np.abs(t[:, 0] - s)) > 1e-9 * max(1.0, s[-1]):
            raise InvalidParameter(f"edge {eid!r}: CSV nodes do not match the mesh")
        return t[:, 1]

    return interpolate(f, mesh, tol=tol)


def point_distances(mesh: Mesh, x: EdgeCoordinate) -> np.ndarray:
    """Exact graph distance from ``x`` to every DOF."""
    g = mesh.graph
    D = g.vertex_distances
    ex = g.edge(x.edge)
    ia, ib = g.vertex_index[ex.a], g.vertex_index[ex.b]
    # distance from x to every vertex, leaving through either end of its edge
    to_v = np.minimum(x.s + D[ia], (ex.length - x.s) + D[ib])
    out = np.full(mesh.n_dofs, np.inf)
    for k, e in enumerate(g.edges):
        s = mesh.edge_coordinates(k)
        d = np.minimum(to_v[g.vertex_index[e.a]] + s, to_v[g.vertex_index[e.b]] + (e.length - s))
        if e.id == x.edge:
            d = np.minimum(d, np.abs(s - x.s))
        dofs = mesh.edge_dofs[k]
        out[dofs] = np.minimum(out[dofs], d)
    return out
