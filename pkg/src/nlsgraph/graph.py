"""Compact metric graphs: construction, standard shapes, the path metric.

Edges are oriented ``(a, b)`` and carry an arclength coordinate
``s in [0, length]`` with ``s = 0`` at ``a``.  Self-loops (``a == b``) and
parallel edges are allowed.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    DanglingVertexReference,
    DisconnectedGraph,
    GraphParseError,
    InvalidParameter,
    NonPositiveLength,
)


@dataclass(frozen=True)
class Edge:
    id: str
    a: str
    b: str
    length: float

    @property
    def is_loop(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True)
class EdgeCoordinate:
    """A point of the graph: arclength ``s`` along edge ``edge``."""

    edge: str
    s: float


@dataclass(frozen=True, eq=False)
class MetricGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    @property
    def total_length(self) -> float:
        return math.fsum(e.length for e in self.edges)

    @cached_property
    def vertex_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self.edge_index[edge_id]]

    @cached_property
    def degree(self) -> dict[str, int]:
        deg = {v: 0 for v in self.vertices}
        for e in self.edges:
            deg[e.a] += 1
            deg[e.b] += 1
        return deg

    @cached_property
    def branch_vertices(self) -> tuple[str, ...]:
        """Vertices of degree other than 2.

        A degree-2 vertex joining two distinct edges is metrically an interior
        point: Kirchhoff there only imposes continuity of the derivative.
        """
        return tuple(v for v in self.vertices if self.degree[v] != 2)

    @cached_property
    def vertex_distances(self) -> np.ndarray:
        """All-pairs shortest path lengths over the vertex skeleton."""
        n = len(self.vertices)
        rows, cols, vals = [], [], []
        best: dict[tuple[int, int], float] = {}
        for e in self.edges:
            if e.is_loop:
                continue
            i, j = self.vertex_index[e.a], self.vertex_index[e.b]
            key = (min(i, j), max(i, j))
            best[key] = min(best.get(key, math.inf), e.length)
        for (i, j), w in best.items():
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        adj = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        D = dijkstra(adj, directed=False)
        return np.minimum(D, D.T)  # summation order differs between the two directions

    def distance(self, x: EdgeCoordinate, y: EdgeCoordinate) -> float:
        return graph_distance(self, x, y)

    def vertex_coordinate(self, v: str) -> EdgeCoordinate:
        for e in self.edges:
            if e.a == v:
                return EdgeCoordinate(e.id, 0.0)
            if e.b == v:
                return EdgeCoordinate(e.id, e.length)
        raise DanglingVertexReference(v)

    def describe(self) -> str:
        lines = ["[vertices]", *self.vertices, "[edges]"]
        lines += [f"{e.id} {e.a} {e.b} {e.length!r}" for e in self.edges]
        return "\n".join(lines) + "\n"


def build_graph(vertices: Iterable[str], edges: Iterable[Sequence]) -> MetricGraph:
    """Validate a vertex list and ``(id, a, b, length)`` edge tuples.

    Raises
    ------
    NonPositiveLength
        Some edge length is not a finite positive number.
    DanglingVertexReference
        An edge names an unknown vertex, or a vertex has no incident edge.
    DisconnectedGraph
        The skeleton has more than one connected component.
    """
    verts = tuple(str(v) for v in vertices)
    if not verts:
        raise InvalidParameter("graph needs at least one vertex")
    if len(set(verts)) != len(verts):
        raise InvalidParameter("duplicate vertex ids")
    vset = set(verts)
    out: list[Edge] = []
    seen = set()
    for raw in edges:
        eid, a, b, length = raw
        eid, a, b = str(eid), str(a), str(b)
        length = float(length)
        if eid in seen:
            raise InvalidParameter(f"duplicate edge id {eid!r}")
        seen.add(eid)
        if not (math.isfinite(length) and length > 0.0):
            raise NonPositiveLength(f"edge {eid!r} has length {length}")
        for v in (a, b):
            if v not in vset:
                raise DanglingVertexReference(f"edge {eid!r} references unknown vertex {v!r}")
        out.append(Edge(eid, a, b, length))
    if not out:
        raise InvalidParameter("graph needs at least one edge")
    used = {e.a for e in out} | {e.b for e in out}
    lonely = [v for v in verts if v not in used]
    if lonely:
        raise DanglingVertexReference(f"vertices without edges: {lonely}")

    idx = {v: i for i, v in enumerate(verts)}
    rows = [idx[e.a] for e in out]
    cols = [idx[e.b] for e in out]
    adj = coo_matrix((np.ones(len(out)), (rows, cols)), shape=(len(verts),) * 2)
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise DisconnectedGraph(f"graph has {ncomp} connected components")
    return MetricGraph(verts, tuple(out))


def _lengths(lengths, count: int) -> list[float]:
    if np.isscalar(lengths):
        vals = [float(lengths)] * count
    else:
        vals = [float(x) for x in lengths]
        if len(vals) != count:
            raise InvalidParameter(f"expected {count} lengths, got {len(vals)}")
    if any(not (math.isfinite(x) and x > 0) for x in vals):
        raise InvalidParameter(f"lengths must be positive: {vals}")
    return vals


def standard_graph(kind: str, lengths=1.0, m: int | None = None) -> MetricGraph:
    """Canonical labelled graphs.

    ``interval``: vertices ``a``, ``b``; one edge.
    ``cycle``: one vertex with a self-loop.
    ``star``: centre ``c`` and tips ``t1..tm``; each edge starts at the centre.
    ``dumbbell``: two loops (lengths[0], lengths[2]) joined by a bridge
    (lengths[1]).
    ``path``: a chain ``v0 - v1 - ... - vk`` with the given edge lengths.
    """
    kind = kind.lower()
    if kind == "interval":
        (L,) = _lengths(lengths, 1)
        return build_graph(["a", "b"], [("e", "a", "b", L)])
    if kind == "cycle":
        (L,) = _lengths(lengths, 1)
        return build_graph(["v"], [("e", "v", "v", L)])
    if kind == "star":
        if m is None or int(m) != m or m < 1:
            raise InvalidParameter(f"star needs an integer m >= 1, got {m!r}")
        m = int(m)
        ls = _lengths(lengths, m)
        verts = ["c"] + [f"t{i}" for i in range(1, m + 1)]
        edges = [(f"e{i}", "c", f"t{i}", ls[i - 1]) for i in range(1, m + 1)]
        return build_graph(verts, edges)
    if kind == "dumbbell":
        l1, lb, l2 = _lengths(lengths, 3)
        return build_graph(
            ["u", "w"],
            [("loop1", "u", "u", l1), ("bridge", "u", "w", lb), ("loop2", "w", "w", l2)],
        )
    if kind == "path":
        ls = _lengths(lengths, 1 if np.isscalar(lengths) else len(lengths))
        verts = [f"v{i}" for i in range(len(ls) + 1)]
        edges = [(f"e{i}", f"v{i}", f"v{i + 1}", ls[i]) for i in range(len(ls))]
        return build_graph(verts, edges)
    raise InvalidParameter(f"unknown graph kind {kind!r}")


def graded_path_lengths(total: float, finest: float, growth: float = 1.03,
                        core: float = 0.0) -> list[float]:
    """Edge lengths of a path isometric to ``[0, total]``, refined at its midpoint.

    Each half is ``core`` worth of edges of length ``finest`` followed by a
    geometric sequence with ratio ``growth``; the outermost edge absorbs the
    remainder.  The result is symmetric about the midpoint, which is a vertex.
    """
    if not (total > 0 and finest > 0 and growth >= 1.0 and core >= 0):
        raise InvalidParameter("graded_path_lengths: invalid arguments")
    half = 0.5 * total
    side: list[float] = []
    acc = 0.0
    n_core = int(math.ceil(core / finest)) if core > 0 else 0
    for _ in range(n_core):
        if acc + finest > half:
            break
        side.append(finest)
        acc += finest
    step = finest
    while acc < half:
        if acc + step >= half or half - acc - step < 0.5 * step:
            side.append(half - acc)
            acc = half
            break
        side.append(step)
        acc += step
        step *= growth
    side = [x for x in side if x > 0]
    return side[::-1] + side


def _to_vertices(g: MetricGraph, x: EdgeCoordinate) -> list[tuple[int, float]]:
    e = g.edge(x.edge)
    if not (-1e-12 <= x.s <= e.length + 1e-12):
        raise InvalidParameter(f"coordinate {x} outside edge of length {e.length}")
    s = min(max(x.s, 0.0), e.length)
    ia, ib = g.vertex_index[e.a], g.vertex_index[e.b]
    if e.is_loop:
        return [(ia, min(s, e.length - s))]
    return [(ia, s), (ib, e.length - s)]


def graph_distance(g: MetricGraph, x: EdgeCoordinate, y: EdgeCoordinate) -> float:
    """Shortest-path distance between two points of ``g``."""
    D = g.vertex_distances
    best = math.inf
    for i, dx in _to_vertices(g, x):
        for j, dy in _to_vertices(g, y):
            best = min(best, dx + D[i, j] + dy)
    if x.edge == y.edge:
        best = min(best, abs(x.s - y.s))
    return float(best)


# --- text format --------------------------------------------------------------

def parse_graph(text: str) -> MetricGraph:
    """Parse the ``[vertices]`` / ``[edges]`` text format."""
    section = None
    vertices: list[str] = []
    edges: list[tuple] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip().lower()
            if name not in ("vertices", "edges"):
                raise GraphParseError(f"line {lineno}: unknown section {line!r}")
            section = name
            continue
        if section == "vertices":
            parts = line.split()
            if len(parts) != 1:
                raise GraphParseError(f"line {lineno}: expected one vertex id, got {line!r}")
            vertices.append(parts[0])
        elif section == "edges":
            parts = line.split()
            if len(parts) != 4:
                raise GraphParseError(f"line {lineno}: expected 'id v_a v_b length', got {line!r}")
            try:
                length = float(parts[3])
            except ValueError:
                raise GraphParseError(f"line {lineno}: bad length {parts[3]!r}") from None
            edges.append((parts[0], parts[1], parts[2], length))
        else:
            raise GraphParseError(f"line {lineno}: content outside a section")
    return build_graph(vertices, edges)


def read_graph(path) -> MetricGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def write_graph(g: MetricGraph, path) -> None:
    Path(path).write_text(g.describe(), encoding="utf-8")
