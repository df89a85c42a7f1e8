import math

import pytest
from hypothesis import given, strategies as st

from nlsgraph.errors import DanglingVertexReference, DisconnectedGraph, GraphParseError, NonPositiveLength
from nlsgraph.graph import EdgeCoordinate, build_graph, graded_path_lengths, graph_distance, parse_graph, \
    standard_graph

from _helpers import graphs


def test_interval_total_length(interval):
    assert len(interval.vertices) == 2 and len(interval.edges) == 1
    assert interval.total_length == 1.0


def test_star_total_length(star3):
    assert star3.total_length == 3.0


def test_two_components_rejected():
    with pytest.raises(DisconnectedGraph):
        build_graph(["a", "b", "c", "d"], [("e1", "a", "b", 1.0), ("e2", "c", "d", 1.0)])


@pytest.mark.parametrize("length", [0.0, -1.0, math.inf, math.nan])
def test_bad_length_rejected(length):
    with pytest.raises(NonPositiveLength):
        build_graph(["a", "b"], [("e", "a", "b", length)])


def test_dangling_vertex_rejected():
    with pytest.raises(DanglingVertexReference):
        build_graph(["a", "b"], [("e", "a", "x", 1.0)])


def test_cycle_shape(cycle):
    assert cycle.vertices == ("v",)
    assert len(cycle.edges) == 1 and cycle.edges[0].is_loop and cycle.edges[0].length == 1.0


def test_two_star_is_a_segment_of_length_two():
    g = standard_graph("star", 1.0, m=2)
    assert g.total_length == 2.0
    tips = [g.vertex_coordinate("t1"), g.vertex_coordinate("t2")]
    assert graph_distance(g, *tips) == pytest.approx(2.0, abs=1e-15)
    # every point sits on the segment: d(t1, x) + d(x, t2) = 2
    for edge in ("e1", "e2"):
        for s in (0.0, 0.3, 1.0):
            x = EdgeCoordinate(edge, s)
            assert graph_distance(g, tips[0], x) + graph_distance(g, x, tips[1]) == pytest.approx(2.0, abs=1e-15)


def test_dumbbell_shape(dumbbell):
    assert len(dumbbell.vertices) == 2 and len(dumbbell.edges) == 3
    assert sum(e.is_loop for e in dumbbell.edges) == 2


def test_distance_same_edge(interval):
    assert graph_distance(interval, EdgeCoordinate("e", 0.2), EdgeCoordinate("e", 0.7)) == pytest.approx(0.5)


def test_distance_around_cycle(cycle):
    assert graph_distance(cycle, EdgeCoordinate("e", 0.1), EdgeCoordinate("e", 0.9)) == pytest.approx(0.2)


def test_distance_between_star_tips(star3):
    assert graph_distance(star3, star3.vertex_coordinate("t1"), star3.vertex_coordinate("t2")) == 2.0


def test_parallel_edge_shortcut():
    g = build_graph(["a", "b"], [("long", "a", "b", 3.0), ("short", "a", "b", 1.0)])
    assert graph_distance(g, EdgeCoordinate("long", 1.5), EdgeCoordinate("short", 0.5)) == pytest.approx(2.0)


def test_parse_roundtrip(dumbbell):
    g = parse_graph(dumbbell.describe())
    assert g.vertices == dumbbell.vertices and g.edges == dumbbell.edges


@pytest.mark.parametrize("text", ["[vertices]\na\n[edges]\ne a b\n", "[nodes]\na\n", "a b\n",
                                  "[vertices]\na\nb\n[edges]\ne a b one\n"])
def test_parse_errors(text):
    with pytest.raises(GraphParseError):
        parse_graph(text)


def test_graded_path_lengths_cover_interval():
    ls = graded_path_lengths(20.0, 0.01, 1.05)
    assert math.fsum(ls) == pytest.approx(20.0, rel=1e-14)
    assert ls == ls[::-1]
    assert min(ls) == pytest.approx(0.01)


def _points(g, seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(3):
        e = g.edges[int(rng.integers(len(g.edges)))]
        out.append(EdgeCoordinate(e.id, float(rng.uniform(0, e.length))))
    return out


@given(graphs(), st.integers(0, 10**6))
def test_distance_is_a_metric(g, seed):
    x, y, z = _points(g, seed)
    dxy, dyz, dxz = graph_distance(g, x, y), graph_distance(g, y, z), graph_distance(g, x, z)
    assert graph_distance(g, x, x) == 0.0
    assert dxy == pytest.approx(graph_distance(g, y, x), abs=1e-12)
    assert dxz <= dxy + dyz + 1e-12
    assert 0.0 <= dxy <= g.total_length + 1e-12


@given(graphs())
def test_vertex_distances_symmetric(g):
    D = g.vertex_distances
    assert (D == D.T).all()
    assert (D.diagonal() == 0).all()
