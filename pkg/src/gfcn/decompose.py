"""Decomposition of graphs into parallel flows.

Trees are decomposed exactly into ``floor((d_max + 1) / 2)`` flows.  When the
boundary contains every vertex this is done by labelling edges so that each
label occurs at most twice at any vertex; when the boundary is restricted to
low-degree vertices and ``d_max`` is odd, the tree is first padded to a
regular tree, decomposed by the two-leaf induction (``d_max = 3``) or by
peeling a saturating flow (``d_max >= 5``), and the result restricted back.
General graphs are peeled one spanning forest at a time.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .flows import FlowCover, ParallelFlow, Path, coverage, regularize
from .graph import Graph, GraphError, lattice_graph

log = logging.getLogger(__name__)

Adj = dict[int, list[int]]

STRATEGIES = ("tree-exact", "bfs-peel", "dfs-peel", "lattice", "centered-paths")


class DecomposeError(ValueError):
    pass


@dataclass
class DecomposeConfig:
    strategy: str = "bfs-peel"
    epsilon_target: float = 1.0
    min_path_len: int = 1
    max_path_len: Optional[int] = None
    seed: int = 0
    center_vertices: Optional[list[int]] = None
    center_radius: Optional[int] = None
    lattice_shape: Optional[tuple[int, int]] = None
    diagonals: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise DecomposeError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not 0 < self.epsilon_target <= 1:
            raise DecomposeError("epsilon_target must lie in (0, 1]")
        if self.min_path_len < 1:
            raise DecomposeError("min_path_len must be at least 1")
        if self.max_path_len is not None and self.max_path_len < self.min_path_len:
            raise DecomposeError("max_path_len is smaller than min_path_len")


# -- helpers ----------------------------------------------------------------

def _paths_from_edges(edges: Iterable[tuple[int, int]]) -> list[Path]:
    """Split an edge set with all degrees <= 2 and no cycles into paths."""
    adj: Adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    for v, nb in adj.items():
        if len(nb) > 2:
            raise AssertionError(f"vertex {v} has {len(nb)} edges in one flow")
    seen: set[int] = set()
    paths = []
    for start in sorted(adj):
        if start in seen or len(adj[start]) != 1:
            continue
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [w for w in adj[cur] if w != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            seen.add(cur)
        paths.append(tuple(path))
    if len(seen) != len(adj):
        raise AssertionError("edge set contains a cycle")
    return paths


def _tree_adj(g: Graph) -> Adj:
    return {v: list(g.neighbors(v)) for v in range(g.num_vertices) if g.degree(v) > 0}


def _root(adj: Adj) -> int:
    return min(adj, key=lambda v: (-len(adj[v]), v))


def _bfs_parents(adj: Adj, root: int) -> tuple[list[int], dict[int, Optional[int]]]:
    parent: dict[int, Optional[int]] = {root: None}
    order = [root]
    q = deque([root])
    while q:
        u = q.popleft()
        for w in sorted(adj[u]):
            if w not in parent:
                parent[w] = u
                order.append(w)
                q.append(w)
    return order, parent


# -- labelling scheme (boundary = V, or even d_max) ------------------------

def pair_labelling(adj: Adj, root: Optional[int] = None) -> dict[tuple[int, int], int]:
    """Label tree edges with ``ceil(d_max / 2)`` labels, each at most twice per vertex.

    Traversal is breadth first from ``root``.  At each vertex the unlabelled
    edges are paired in ascending neighbour order, each pair taking the lowest
    label unused at the vertex; a single leftover edge continues the label of
    the parent edge.  With an even maximal degree every max-degree vertex ends
    up with every label exactly twice.
    """
    if not adj:
        return {}
    if root is None:
        root = _root(adj)
    d_max = max(len(nb) for nb in adj.values())
    k = (d_max + 1) // 2
    order, parent = _bfs_parents(adj, root)
    label: dict[tuple[int, int], int] = {}
    for v in order:
        p = parent[v]
        pc = None if p is None else label[(min(p, v), max(p, v))]
        used = {pc} if pc is not None else set()
        free = [c for c in range(k) if c not in used]
        todo = sorted(w for w in adj[v] if w != p)
        fi = 0
        i = 0
        while i + 1 < len(todo):
            c = free[fi]
            fi += 1
            for w in todo[i : i + 2]:
                label[(min(v, w), max(v, w))] = c
            i += 2
        if i < len(todo):
            w = todo[i]
            label[(min(v, w), max(v, w))] = pc if pc is not None else free[fi]
    return label


def _flows_from_labels(label: dict[tuple[int, int], int]) -> list[list[Path]]:
    if not label:
        return []
    k = max(label.values()) + 1
    groups: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    for e, c in label.items():
        groups[c].append(e)
    return [_paths_from_edges(es) for es in groups]


# -- inductive construction on regular trees -------------------------------

def _regular_tree_flows(adj: Adj) -> list[list[Path]]:
    """Cover a tree whose internal vertices all have degree ``d`` (leaves as boundary)."""
    d = max(len(nb) for nb in adj.values())
    if d <= 2 or d % 2 == 0:
        return _flows_from_labels(pair_labelling(adj))
    if d == 3:
        return _two_leaf_induction(adj)
    return _peel_saturating(adj)


def _two_leaf_induction(adj: Adj) -> list[list[Path]]:
    """Two flows on a cubic tree by repeatedly attaching leaf pairs.

    Starting from the star around the root, each frontier vertex ``v`` with
    new children ``v1 < v2`` is handled as in the inductive step: a path
    ending at ``v`` is extended by ``(v, v1)``; the other flow extends its path
    at ``v`` by ``(v, v2)`` if it has one, else gains the path ``v1-v-v2``.
    """
    root = _root(adj)
    order, parent = _bfs_parents(adj, root)
    paths: list[list[deque]] = [[], []]
    ends: list[dict[int, int]] = [{}, {}]

    def add(f: int, seq: Sequence[int]) -> None:
        paths[f].append(deque(seq))
        pid = len(paths[f]) - 1
        ends[f][seq[0]] = pid
        ends[f][seq[-1]] = pid

    def extend(f: int, v: int, w: int) -> None:
        pid = ends[f].pop(v)
        dq = paths[f][pid]
        if dq[-1] == v:
            dq.append(w)
        else:
            dq.appendleft(w)
        ends[f][w] = pid

    a, b, c = sorted(adj[root])
    add(0, (a, root, b))
    add(1, (b, root, c))
    for v in order[1:]:
        kids = sorted(w for w in adj[v] if w != parent[v])
        if not kids:
            continue
        v1, v2 = kids
        f1 = 0 if v in ends[0] else 1
        f2 = 1 - f1
        extend(f1, v, v1)
        if v in ends[f2]:
            extend(f2, v, v2)
        else:
            add(f2, (v1, v, v2))
    return [[tuple(p) for p in fl] for fl in paths]


def _peel_saturating(adj: Adj) -> list[list[Path]]:
    """Peel one flow through every internal vertex, then recurse on the rest."""
    root = _root(adj)
    d = len(adj[root])
    order, parent = _bfs_parents(adj, root)
    chosen: set[tuple[int, int]] = set()
    for v in order:
        if len(adj[v]) < d:
            continue
        p = parent[v]
        need = 2
        if p is not None and (min(p, v), max(p, v)) in chosen:
            need = 1
        kids = sorted(w for w in adj[v] if w != p)
        for w in kids[:need]:
            chosen.add((min(v, w), max(v, w)))
    peeled = _paths_from_edges(chosen)
    rest: Adj = {}
    for v, nb in adj.items():
        keep = [w for w in nb if (min(v, w), max(v, w)) not in chosen]
        if keep:
            rest[v] = keep
    flows: list[list[Path]] = [peeled]
    for comp in _components(rest):
        for i, fl in enumerate(_regular_tree_flows(comp)):
            while len(flows) <= i + 1:
                flows.append([])
            flows[i + 1].extend(fl)
    return flows


def _components(adj: Adj) -> list[Adj]:
    seen: set[int] = set()
    out = []
    for s in sorted(adj):
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    q.append(w)
        out.append({v: adj[v] for v in comp})
    return out


def _pad_to_regular(adj: Adj) -> tuple[Adj, int]:
    """Attach new leaves so every non-leaf vertex reaches the maximal degree.

    Returns the padded adjacency and the first id used for added vertices.
    """
    d = max(len(nb) for nb in adj.values())
    nxt = max(adj) + 1
    first = nxt
    out = {v: list(nb) for v, nb in adj.items()}
    for v in sorted(adj):
        deg = len(adj[v])
        if 1 < deg < d:
            for _ in range(d - deg):
                out[v].append(nxt)
                out[nxt] = [v]
                nxt += 1
    return out, first


def _restrict(flows: list[list[Path]], first_new: int) -> list[list[Path]]:
    out = []
    for fl in flows:
        kept = []
        for p in fl:
            q = [v for v in p if v < first_new]
            # added vertices are leaves, so they can only sit at the ends
            if len(q) >= 2:
                kept.append(tuple(q))
        out.append(kept)
    return out


def _decompose_tree_adj(adj: Adj, strict: bool) -> list[list[Path]]:
    if not adj:
        return []
    d = max(len(nb) for nb in adj.values())
    if d <= 2:
        return [_paths_from_edges({(min(u, w), max(u, w)) for u in adj for w in adj[u]})]
    if not strict or d % 2 == 0:
        return _flows_from_labels(pair_labelling(adj))
    padded, first_new = _pad_to_regular(adj)
    return _restrict(_regular_tree_flows(padded), first_new)


def tree_decompose(g: Graph) -> FlowCover:
    """Exact cover of a tree by ``floor((d_max + 1) / 2)`` parallel flows.

    The boundary of ``g`` must contain every vertex whose degree is below the
    maximal degree.  Flows share no edge unless ``d_max`` is odd and some
    max-degree vertex lies outside the boundary; those vertices must be
    interior in every flow, which forces one shared edge at each of them.
    """
    if not g.is_tree():
        raise DecomposeError(
            f"{g.name} is not a tree ({g.num_vertices} vertices, {g.num_edges} edges); use bfs_peel"
        )
    d = g.max_degree
    low = {v for v in range(g.num_vertices) if g.degree(v) < d}
    missing = low - g.boundary
    if missing:
        raise DecomposeError(
            f"boundary must contain all vertices of degree < {d}; missing {sorted(missing)[:10]}"
        )
    strict = any(g.degree(v) == d and v not in g.boundary for v in range(g.num_vertices))
    flows = _decompose_tree_adj(_tree_adj(g), strict)
    return FlowCover.build(g, flows)


# -- general graphs ---------------------------------------------------------

def _spanning_forest(adj: Adj, search: str) -> list[Adj]:
    """Spanning trees of each component, rooted at highest-degree vertices."""
    remaining = set(adj)
    forest = []
    while remaining:
        root = min(remaining, key=lambda v: (-len(adj[v]), v))
        tree: Adj = {root: []}
        if search == "bfs":
            q = deque([root])
            while q:
                u = q.popleft()
                for w in sorted(adj[u]):
                    if w not in tree:
                        tree[w] = [u]
                        tree[u].append(w)
                        q.append(w)
        else:
            stack = [(root, iter(sorted(adj[root])))]
            while stack:
                u, it = stack[-1]
                for w in it:
                    if w not in tree:
                        tree[w] = [u]
                        tree[u].append(w)
                        stack.append((w, iter(sorted(adj[w]))))
                        break
                else:
                    stack.pop()
        remaining -= set(tree)
        forest.append(tree)
    return forest


def bfs_peel(g: Graph, cfg: Optional[DecomposeConfig] = None) -> FlowCover:
    """Cover any graph by repeatedly decomposing spanning forests.

    Each round extracts a BFS (or DFS, for strategy ``dfs-peel``) spanning
    forest of the remaining edges, decomposes each tree exactly, and removes
    its edges.  Flows are appended largest first and peeling stops as soon as
    the covered fraction reaches ``epsilon_target``.
    """
    cfg = cfg or DecomposeConfig()
    search = "dfs" if cfg.strategy == "dfs-peel" else "bfs"
    residual: Adj = {v: list(g.neighbors(v)) for v in range(g.num_vertices) if g.degree(v)}
    flows: list[list[Path]] = []
    covered = 0
    target = cfg.epsilon_target * g.num_edges
    while residual and covered < target - 1e-9:
        round_flows: list[list[Path]] = []
        for tree in _spanning_forest(residual, search):
            if len(tree) < 2:
                continue
            for i, fl in enumerate(_decompose_tree_adj(tree, strict=False)):
                while len(round_flows) <= i:
                    round_flows.append([])
                round_flows[i].extend(fl)
        round_flows.sort(key=lambda fl: -sum(len(p) - 1 for p in fl))
        used: set[tuple[int, int]] = set()
        for fl in round_flows:
            flows.append(fl)
            for p in fl:
                for i in range(len(p) - 1):
                    used.add((min(p[i], p[i + 1]), max(p[i], p[i + 1])))
            covered = sum(len(p) - 1 for f in flows for p in f)
            if covered >= target - 1e-9:
                break
        nxt: Adj = {}
        for v, nb in residual.items():
            keep = [w for w in nb if (min(v, w), max(v, w)) not in used]
            if keep:
                nxt[v] = keep
        residual = nxt
    log.debug("peeled %d flows from %s", len(flows), g.name)
    return FlowCover.build(g.with_boundary(None), flows)


# -- inspection-based covers --------------------------------------------------

def lattice_flows(height: int, width: int, diagonals: bool = False) -> tuple[Graph, FlowCover]:
    """Canonical directional cover of a grid (optionally with diagonals).

    Returns the lattice graph together with its cover: rows, columns and, with
    ``diagonals``, the two diagonal directions (corner diagonals are single
    vertices).
    """
    if height < 2 or width < 2:
        raise DecomposeError("lattice needs height and width >= 2")
    g = lattice_graph(height, width, diagonals)
    vid = lambda r, c: r * width + c  # noqa: E731
    rows = [tuple(vid(r, c) for c in range(width)) for r in range(height)]
    cols = [tuple(vid(r, c) for r in range(height)) for c in range(width)]
    flows = [rows, cols]
    if diagonals:
        down_right = []
        for start in [(0, c) for c in range(width - 1, -1, -1)] + [(r, 0) for r in range(1, height)]:
            r, c = start
            p = []
            while r < height and c < width:
                p.append(vid(r, c))
                r, c = r + 1, c + 1
            down_right.append(tuple(p))
        down_left = []
        for start in [(0, c) for c in range(width)] + [(r, width - 1) for r in range(1, height)]:
            r, c = start
            p = []
            while r < height and c >= 0:
                p.append(vid(r, c))
                r, c = r + 1, c - 1
            down_left.append(tuple(p))
        flows += [down_right, down_left]
    return g, FlowCover.build(g, flows)


def centered_paths(g: Graph, centers: Iterable[int], l: int) -> FlowCover:
    """Paths of up to ``l`` vertices centred at each given vertex.

    Each side grows greedily for ``l // 2`` steps, preferring vertices not yet
    used by earlier paths, then lower ids.  Paths are grouped first-fit into
    vertex-disjoint flows.
    """
    centers = sorted(set(int(c) for c in centers))
    if not centers:
        raise DecomposeError("centered_paths needs at least one centre")
    if l < 1 or l % 2 == 0:
        raise DecomposeError("path length l must be a positive odd number")
    for c in centers:
        g.check_vertex(c)
    half = l // 2
    used: set[int] = set()
    paths = []
    for c in centers:
        path = deque([c])
        members = {c}
        for side in ("left", "right"):
            for _ in range(half):
                end = path[0] if side == "left" else path[-1]
                cand = [w for w in g.neighbors(end) if w not in members]
                if not cand:
                    break
                w = min(cand, key=lambda x: (x in used, x))
                members.add(w)
                if side == "left":
                    path.appendleft(w)
                else:
                    path.append(w)
        used |= members
        paths.append(tuple(path))
    flows: list[list[Path]] = []
    flow_verts: list[set[int]] = []
    for p in paths:
        for fl, vs in zip(flows, flow_verts):
            if not vs & set(p):
                fl.append(p)
                vs.update(p)
                break
        else:
            flows.append([p])
            flow_verts.append(set(p))
    return FlowCover.build(g, flows)


def decompose(g: Graph, cfg: DecomposeConfig) -> FlowCover:
    """Run the configured strategy, then regularize path lengths."""
    if cfg.strategy == "tree-exact":
        cover = tree_decompose(g)
    elif cfg.strategy in ("bfs-peel", "dfs-peel"):
        cover = bfs_peel(g, cfg)
    elif cfg.strategy == "lattice":
        if cfg.lattice_shape is None:
            raise DecomposeError("lattice strategy needs lattice_shape")
        lg, cover = lattice_flows(*cfg.lattice_shape, cfg.diagonals)
        g = lg
    else:
        if not cfg.center_vertices:
            raise DecomposeError("centered-paths strategy needs center_vertices")
        cover = centered_paths(g, cfg.center_vertices, cfg.center_radius or 5)
    if cfg.min_path_len > 1 or cfg.max_path_len is not None:
        cover = regularize(g, cover, cfg.min_path_len, cfg.max_path_len)
    return cover
