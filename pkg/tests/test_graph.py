import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfcn.graph import (
    Graph,
    GraphError,
    ParseError,
    are_parallel,
    check_path,
    distance,
    format_edge_list,
    is_non_extendable,
    lattice_graph,
    parse_edge_list,
    path_graph,
    product,
    star_graph,
    to_networkx,
)


def test_parse_simple():
    g = parse_edge_list("0 1\n1 2")
    assert g.num_vertices == 3
    assert g.num_edges == 2


def test_parse_weighted():
    g = parse_edge_list("0 1 0.5\n1 2 2.0")
    assert g.weighted
    assert g.weight(0, 1) == 0.5
    assert g.weight(2, 1) == 2.0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("0 0", "self-loop"),
        ("0 1\n1 0", "duplicate"),
        ("0 1 -1", "weight"),
        ("0 1 0", "weight"),
        ("0 1\nfoo bar", "line 2"),
        ("0 1 2 3", "line 1"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(GraphError, match=fragment):
        parse_edge_list(text)


def test_parse_error_has_line_number():
    with pytest.raises(ParseError) as exc:
        parse_edge_list("# header\n0 1\n1 x\n")
    assert exc.value.lineno == 3


def test_comments_ignored():
    g = parse_edge_list("# comment\n0 1\n\n# another\n1 2\n")
    assert list(g.edges) == [(0, 1), (1, 2)]


def test_distance_examples():
    p = path_graph(3)
    assert distance(p, 0, 2) == 2
    assert distance(p, 0, 0) == 0
    two = Graph(4, [(0, 1), (2, 3)])
    assert distance(two, 0, 3) == math.inf
    with pytest.raises(GraphError):
        distance(p, 0, 7)


def test_distance_ignores_weights():
    g = parse_edge_list("0 1 5.0\n1 2 0.1")
    assert distance(g, 0, 2) == 2


def test_non_extendable_examples():
    g = path_graph(3).with_boundary({0, 2})
    assert is_non_extendable(g, [0, 1, 2])
    assert not is_non_extendable(g, [0, 1])
    assert is_non_extendable(g, [1])


def test_non_extendable_closed_loop():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)], boundary=[])
    assert is_non_extendable(g, [0, 1, 2, 3, 0])


def test_non_extendable_rejects_non_path():
    g = path_graph(3)
    with pytest.raises(GraphError):
        is_non_extendable(g, [0, 2])


@pytest.mark.parametrize(
    "p1, p2, expected",
    [([0, 1], [2, 3], True), ([0, 1], [1, 2], False), ([0], [0], False)],
)
def test_are_parallel(p1, p2, expected):
    assert are_parallel(p1, p2) is expected


def test_check_path_rejects_revisit():
    g = Graph(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(GraphError):
        check_path(g, [0, 1, 0])
    check_path(g, [0, 1, 2, 0])  # closed loop is fine


def test_product_examples():
    p2 = path_graph(2)
    sq = product(p2, p2)
    assert nx.is_isomorphic(to_networkx(sq), nx.cycle_graph(4))
    p3 = path_graph(3)
    grid = product(p3, p3)
    assert grid.num_edges == 12
    assert grid == lattice_graph(3, 3)
    k1 = Graph(1, [])
    g = star_graph(3)
    assert nx.is_isomorphic(to_networkx(product(k1, g)), to_networkx(g))


def test_product_vertex_ids():
    g = product(path_graph(2), path_graph(3))
    # (a, b) -> a * 3 + b
    assert g.has_edge(0, 1)
    assert g.has_edge(0, 3)
    assert not g.has_edge(2, 3)


def test_boundary_must_be_subset():
    with pytest.raises(GraphError):
        Graph(2, [(0, 1)], boundary=[5])


def test_default_boundary_is_all():
    assert path_graph(4).boundary == frozenset(range(4))


@st.composite
def small_graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph(n, edges)


@settings(max_examples=60, deadline=None)
@given(small_graphs(), st.data())
def test_triangle_inequality(g, data):
    u, v, w = (data.draw(st.integers(0, g.num_vertices - 1)) for _ in range(3))
    assert distance(g, u, w) <= distance(g, u, v) + distance(g, v, w)
    assert distance(g, u, v) == distance(g, v, u)


@settings(max_examples=40, deadline=None)
@given(small_graphs(6), small_graphs(6))
def test_product_edge_count(g1, g2):
    g = product(g1, g2)
    assert g.num_edges == g1.num_vertices * g2.num_edges + g2.num_vertices * g1.num_edges


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_serialize_round_trip(g):
    if g.num_edges == 0:
        return
    text = format_edge_list(g)
    h = parse_edge_list(text)
    # isolated high-id vertices are not representable in an edge list
    assert h.edges == g.edges
    assert parse_edge_list(format_edge_list(h)) == h


def test_weighted_round_trip():
    g = parse_edge_list("0 1 0.1\n1 2 3.25\n")
    assert parse_edge_list(format_edge_list(g)) == g


def test_distance_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(20):
        nxg = nx.gnp_random_graph(15, 0.15, seed=int(rng.integers(1 << 30)))
        g = Graph(15, list(nxg.edges()))
        lengths = dict(nx.all_pairs_shortest_path_length(nxg))
        for u in range(15):
            for v in range(15):
                assert distance(g, u, v) == lengths[u].get(v, math.inf)
