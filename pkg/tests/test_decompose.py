import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfcn.decompose import (
    DecomposeConfig,
    DecomposeError,
    bfs_peel,
    centered_paths,
    decompose,
    lattice_flows,
    tree_decompose,
)
from gfcn.flows import (
    CoverError,
    FlowCover,
    cover_from_dict,
    flow_count_bound,
    load_cover,
    merge_covers,
    regularize,
    save_cover,
    validate_cover,
)
from gfcn.graph import Graph, from_networkx, path_graph, star_graph

from helpers import linear_forest_cover_exists, random_bounded_graph, random_tree


def mu(d):
    return (d + 1) // 2


def fig2d_graph():
    # two horizontal paths joined by one rung: 10 edges
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8), (8, 9), (9, 10), (2, 7)]
    return Graph(11, edges, name="fig2d")


def assert_exact(g, cover):
    rep = validate_cover(g, cover)
    assert rep.ok, rep.violations
    assert rep.epsilon_measured == 1.0
    assert cover.num_flows == mu(g.max_degree)


# -- trees ----------------------------------------------------------------------


def test_star_five():
    g = star_graph(5)
    cover = tree_decompose(g)
    assert_exact(g, cover)
    assert cover.num_flows == 3


def test_path_is_one_flow():
    g = path_graph(4)
    cover = tree_decompose(g)
    assert cover.flows == [[(0, 1, 2, 3)]]


def test_full_binary_tree_depth_three():
    g = from_networkx(nx.balanced_tree(2, 3))
    assert g.max_degree == 3
    assert_exact(g, tree_decompose(g))
    assert tree_decompose(g).num_flows == 2


def test_regular_tree_degree_four():
    # root with 4 children, each with 3 children: every internal vertex has degree 4
    edges = [(0, c) for c in range(1, 5)]
    nxt = 5
    for c in range(1, 5):
        for _ in range(3):
            edges.append((c, nxt))
            nxt += 1
    g = Graph(nxt, edges)
    assert g.max_degree == 4
    assert_exact(g, tree_decompose(g))
    assert tree_decompose(g).num_flows == 2


def test_non_tree_rejected():
    g = Graph(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(DecomposeError, match="bfs_peel"):
        tree_decompose(g)


def test_boundary_must_hold_low_degree_vertices():
    g = star_graph(3).with_boundary({1, 2})
    with pytest.raises(DecomposeError):
        tree_decompose(g)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6, 7, 8, 9, 10, 11])
def test_random_trees_each_degree(d):
    rng = np.random.default_rng(d)
    for _ in range(15):
        g = random_tree(int(rng.integers(d + 2, 120)), d, rng)
        assert_exact(g, tree_decompose(g))


@pytest.mark.parametrize("d", [3, 4, 5, 7, 9])
def test_restricted_boundary_keeps_max_degree_vertices_interior(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(10):
        g = random_tree(int(rng.integers(d + 2, 80)), d, rng)
        dmax = g.max_degree
        low = {v for v in range(g.num_vertices) if g.degree(v) < dmax}
        h = g.with_boundary(low)
        cover = tree_decompose(h)
        assert_exact(h, cover)
        for flow in cover.flows:
            for p in flow:
                for v in (p[0], p[-1]):
                    if len(p) > 1:
                        assert g.degree(v) < dmax


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 150), st.integers(2, 11), st.integers(0, 2**31))
def test_tree_exactness_property(n, d, seed):
    g = random_tree(n, d, np.random.default_rng(seed))
    assert_exact(g, tree_decompose(g))


@pytest.mark.parametrize("n", range(2, 8))
def test_lower_bound_small_trees(n):
    for t in nx.nonisomorphic_trees(n):
        g = from_networkx(t)
        k = mu(g.max_degree)
        assert linear_forest_cover_exists(g, k)
        assert not linear_forest_cover_exists(g, k - 1)


# -- general graphs -----------------------------------------------------------------


def test_k4_peel():
    g = from_networkx(nx.complete_graph(4))
    cover = bfs_peel(g)
    assert validate_cover(g, cover).ok
    assert cover.epsilon == 1.0
    assert cover.num_flows <= 6


@pytest.mark.parametrize("strategy", ["bfs-peel", "dfs-peel"])
def test_peel_random_graphs(strategy):
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(5, 150))
        g = random_bounded_graph(n, int(rng.integers(2, 11)), 3 * n, rng)
        cover = bfs_peel(g, DecomposeConfig(strategy=strategy))
        rep = validate_cover(g, cover)
        assert rep.ok, rep.violations
        assert rep.epsilon_measured == 1.0
        assert cover.num_flows <= flow_count_bound(g.max_degree)


def test_peel_on_tree_matches_exact():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_tree(int(rng.integers(3, 100)), int(rng.integers(2, 9)), rng)
        assert bfs_peel(g).num_flows == tree_decompose(g).num_flows


def test_peel_never_repeats_edges():
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = random_bounded_graph(60, 8, 200, rng)
        assert bfs_peel(g).repeated_edges() == []


def test_empty_graph_peel():
    g = Graph(5, [])
    cover = bfs_peel(g)
    assert cover.num_flows == 0
    assert cover.epsilon == 1.0


def test_fig2d_partial_cover():
    g = fig2d_graph()
    horizontal = [[(0, 1, 2, 3, 4), (5, 6, 7, 8, 9, 10)]]
    rep = validate_cover(g, horizontal)
    assert rep.ok
    assert rep.epsilon_measured == pytest.approx(0.9)


def test_fig2d_epsilon_target_uses_fewer_flows():
    g = fig2d_graph()
    full = bfs_peel(g, DecomposeConfig(epsilon_target=1.0))
    partial = bfs_peel(g, DecomposeConfig(epsilon_target=0.9))
    assert partial.epsilon >= 0.9
    assert partial.num_flows < full.num_flows


# -- lattices and centred paths -------------------------------------------------


def test_lattice_plain():
    g, cover = lattice_flows(3, 3, False)
    assert cover.num_flows == 2
    assert [len(f) for f in cover.flows] == [3, 3]
    assert validate_cover(g, cover).ok and cover.epsilon == 1.0


def test_lattice_diagonals():
    g, cover = lattice_flows(3, 3, True)
    assert cover.num_flows == 4
    rep = validate_cover(g, cover)
    assert rep.ok and rep.epsilon_measured == 1.0
    for f in cover.flows[2:]:
        assert any(len(p) == 1 for p in f)


def test_lattice_two_by_two():
    g, cover = lattice_flows(2, 2, False)
    assert cover.num_flows == 2
    assert all(len(p) == 2 for p in cover.paths())
    assert sum(1 for _ in cover.paths()) == 4


def test_centered_path_on_path_graph():
    g = path_graph(5)
    cover = centered_paths(g, [2], 5)
    assert cover.flows == [[(0, 1, 2, 3, 4)]]


def test_centered_path_star():
    g = star_graph(4)
    cover = centered_paths(g, [0], 3)
    (p,) = list(cover.paths())
    assert len(p) == 3 and p[1] == 0


def test_centered_path_isolated_vertex():
    g = Graph(3, [(0, 1)])
    cover = centered_paths(g, [2], 3)
    assert list(cover.paths()) == [(2,)]


def test_centered_paths_cover_every_center():
    rng = np.random.default_rng(5)
    g = random_bounded_graph(50, 5, 120, rng)
    centers = [0, 3, 7, 11, 20]
    cover = centered_paths(g, centers, 5)
    seen = cover.vertices()
    assert all(c in seen for c in centers)
    for f in cover.flows:
        verts = [v for p in f for v in p]
        assert len(verts) == len(set(verts))


def test_centered_paths_errors():
    with pytest.raises(DecomposeError):
        centered_paths(path_graph(3), [], 3)
    with pytest.raises(DecomposeError):
        centered_paths(path_graph(3), [1], 4)


# -- regularization ----------------------------------------------------------------


def test_regularize_split():
    g = path_graph(10)
    cover = FlowCover.build(g, [[tuple(range(10))]])
    out = regularize(g, cover, min_path_len=2, max_path_len=4)
    assert [len(p) for p in out.paths()] == [4, 4, 2]


def test_regularize_drops_short_paths():
    g = Graph(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
    cover = FlowCover.build(g, [[(0, 1, 2), (3, 4, 5)]])
    out = regularize(g, cover, min_path_len=6)
    assert out.num_flows == 0
    assert out.epsilon == 0.0


def test_regularize_identity():
    g = star_graph(5)
    cover = tree_decompose(g)
    assert regularize(g, cover).flows == cover.flows


def test_regularize_bad_bounds():
    g = path_graph(3)
    with pytest.raises(CoverError):
        regularize(g, tree_decompose(g), min_path_len=5, max_path_len=2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 8))
def test_regularize_properties(seed, lo, span):
    rng = np.random.default_rng(seed)
    g = random_bounded_graph(40, 6, 100, rng)
    cover = bfs_peel(g)
    hi = lo + span
    out = regularize(g, cover, lo, hi)
    assert out.epsilon <= cover.epsilon
    assert all(lo <= len(p) <= hi for p in out.paths())


def test_decompose_dispatch_with_regularization():
    g = path_graph(9)
    cover = decompose(g, DecomposeConfig(strategy="tree-exact", max_path_len=3))
    assert [len(p) for p in cover.paths()] == [3, 3, 3]


# -- validation, monotonicity, files------------------------------------------------------


def test_validate_reports_shared_vertex():
    g = path_graph(3)
    rep = validate_cover(g, [[(0, 1), (1, 2)]])
    assert any("not parallel" in v for v in rep.violations)


def test_validate_reports_extendable_and_missing_edge():
    g = path_graph(4).with_boundary({0, 3})
    rep = validate_cover(g, [[(0, 1)], [(0, 2)]])
    assert any("extendable" in v for v in rep.violations)
    assert any("invalid path" in v for v in rep.violations)


def test_boundary_superset_keeps_cover():
    rng = np.random.default_rng(11)
    for _ in range(20):
        g = random_tree(int(rng.integers(5, 60)), 5, rng)
        d = g.max_degree
        low = {v for v in range(g.num_vertices) if g.degree(v) < d}
        h = g.with_boundary(low)
        cover = tree_decompose(h)
        extra = set(int(v) for v in rng.choice(g.num_vertices, 3))
        assert validate_cover(g.with_boundary(low | extra), cover).ok


def test_union_of_covers():
    rng = np.random.default_rng(12)
    for _ in range(20):
        t1 = random_tree(int(rng.integers(3, 30)), 4, rng)
        t2 = random_tree(int(rng.integers(3, 30)), 6, rng)
        n1 = t1.num_vertices
        union = Graph(n1 + t2.num_vertices, list(t1.edges) + [(u + n1, v + n1) for u, v in t2.edges])
        c1 = tree_decompose(t1)
        c2 = tree_decompose(t2)
        shifted = [[tuple(v + n1 for v in p) for p in f] for f in c2.flows]
        merged = merge_covers(union, c1, FlowCover.build(union, shifted))
        rep = validate_cover(union, merged)
        assert rep.ok and rep.epsilon_measured == 1.0


def test_flow_file_round_trip(tmp_path):
    g = from_networkx(nx.balanced_tree(3, 2))
    cover = tree_decompose(g)
    path = tmp_path / "c.json"
    save_cover(cover, str(path))
    again = load_cover(str(path), g)
    assert again.flows == cover.flows
    assert again.epsilon == cover.epsilon
    assert validate_cover(g, again).ok


def test_epsilon_recomputed_not_trusted():
    g = path_graph(4)
    d = {"graph": "p", "epsilon": 1.0, "flows": [[[0, 1]]]}
    assert cover_from_dict(d, g).epsilon == pytest.approx(1 / 3)


def test_paths_sorted_by_first_vertex():
    g = star_graph(6)
    for f in tree_decompose(g).flows:
        firsts = [p[0] for p in f]
        assert firsts == sorted(firsts)


def test_exhaustive_matches_decomposition_small():
    for n in range(2, 7):
        for t in nx.nonisomorphic_trees(n):
            g = from_networkx(t)
            best = next(k for k in itertools.count(1) if linear_forest_cover_exists(g, k))
            assert tree_decompose(g).num_flows == best
