"""Undirected simple graphs with a boundary set, hop metric and products."""

from __future__ import annotations

import math
import os
from collections import deque
from typing import Iterable, Optional, Sequence

Edge = tuple[int, int]


class GraphError(ValueError):
    """Raised for malformed graphs, edge lists or paths."""


class ParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable undirected simple graph on vertices ``0..n-1``.

    ``boundary`` defaults to every vertex.  Edge weights are optional; when
    given, every edge carries a strictly positive weight.
    """

    __slots__ = ("_n", "_edges", "_edgeset", "_weights", "_boundary", "_adj", "name")

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[Sequence[int]],
        weights: Optional[Sequence[float]] = None,
        boundary: Optional[Iterable[int]] = None,
        name: str = "graph",
    ):
        if num_vertices < 0:
            raise GraphError("negative vertex count")
        n = int(num_vertices)
        edge_list = [(int(e[0]), int(e[1])) for e in edges]
        if weights is not None and len(weights) != len(edge_list):
            raise GraphError("weights must match edges one to one")
        adj: list[list[int]] = [[] for _ in range(n)]
        seen: dict[Edge, float] = {}
        for i, (u, v) in enumerate(edge_list):
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for {n} vertices")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            k = _key(u, v)
            if k in seen:
                raise GraphError(f"duplicate edge {k}")
            w = 1.0
            if weights is not None:
                w = float(weights[i])
                if not (w > 0 and math.isfinite(w)):
                    raise GraphError(f"edge {k} has non-positive weight {w}")
            seen[k] = w
            adj[u].append(v)
            adj[v].append(u)
        self._n = n
        self._edges = tuple(sorted(seen))
        self._edgeset = frozenset(seen)
        self._weights = None if weights is None else {k: seen[k] for k in self._edges}
        self._adj = tuple(tuple(sorted(a)) for a in adj)
        if boundary is None:
            self._boundary = frozenset(range(n))
        else:
            b = frozenset(int(v) for v in boundary)
            bad = [v for v in b if not 0 <= v < n]
            if bad:
                raise GraphError(f"boundary vertices {sorted(bad)} not in graph")
            self._boundary = b
        self.name = name

    # -- basic accessors -------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return self._n

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> tuple[Edge, ...]:
        """Edges as ``(u, v)`` with ``u < v``, sorted."""
        return self._edges

    @property
    def boundary(self) -> frozenset[int]:
        return self._boundary

    @property
    def weighted(self) -> bool:
        return self._weights is not None

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self._adj]

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self._adj), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return _key(u, v) in self._edgeset

    def weight(self, u: int, v: int) -> float:
        k = _key(u, v)
        if not self.has_edge(u, v):
            raise GraphError(f"no edge {k}")
        return 1.0 if self._weights is None else self._weights[k]

    def with_boundary(self, boundary: Optional[Iterable[int]]) -> "Graph":
        w = None if self._weights is None else [self._weights[e] for e in self._edges]
        return Graph(self._n, self._edges, w, boundary, self.name)

    def check_vertex(self, v: int) -> None:
        if not 0 <= v < self._n:
            raise GraphError(f"vertex {v} not in graph with {self._n} vertices")

    def is_tree(self) -> bool:
        if self._n == 0 or self.num_edges != self._n - 1:
            return False
        return len(bfs_order(self, 0)) == self._n

    def components(self) -> list[list[int]]:
        seen = [False] * self._n
        comps = []
        for s in range(self._n):
            if not seen[s]:
                comp = bfs_order(self, s)
                for v in comp:
                    seen[v] = True
                comps.append(comp)
        return comps

    def subgraph_edges(self, edges: Iterable[Edge], name: Optional[str] = None) -> "Graph":
        """Graph on the same vertex ids restricted to ``edges``."""
        es = sorted({_key(u, v) for u, v in edges})
        w = None if self._weights is None else [self._weights[e] for e in es]
        return Graph(self._n, es, w, self._boundary, name or self.name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self._n == other._n
            and self._edges == other._edges
            and self._weights == other._weights
            and self._boundary == other._boundary
        )

    def __hash__(self) -> int:
        return hash((self._n, self._edges))

    def __repr__(self) -> str:
        return f"Graph(name={self.name!r}, n={self._n}, m={self.num_edges})"


def bfs_order(g: Graph, source: int) -> list[int]:
    seen = {source}
    order = [source]
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def bfs_distances(g: Graph, source: int) -> list[float]:
    """Hop distances from ``source``; ``math.inf`` for unreachable vertices."""
    dist = [math.inf] * g.num_vertices
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in g.neighbors(u):
            if dist[w] == math.inf:
                dist[w] = du
                queue.append(w)
    return dist


def distance(g: Graph, u: int, v: int) -> float:
    """Unweighted hop distance, ``math.inf`` across components."""
    g.check_vertex(u)
    g.check_vertex(v)
    if u == v:
        return 0
    return bfs_distances(g, u)[v]


# -- edge-list text format ------------------------------------------------

def parse_edge_list(text: str, name: str = "graph") -> Graph:
    edges: list[Edge] = []
    weights: list[float] = []
    n_weighted = 0
    max_id = -1
    seen: dict[Edge, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ParseError(lineno, f"expected 'u v [w]', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"vertex ids must be integers: {raw!r}") from None
        if u < 0 or v < 0:
            raise ParseError(lineno, "vertex ids must be non-negative")
        if u == v:
            raise GraphError(f"line {lineno}: self-loop at vertex {u}")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(lineno, f"bad weight {parts[2]!r}") from None
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"line {lineno}: non-positive weight {parts[2]}")
            n_weighted += 1
        k = _key(u, v)
        if k in seen:
            raise GraphError(f"line {lineno}: duplicate edge {k} (first on line {seen[k]})")
        seen[k] = lineno
        edges.append((u, v))
        weights.append(w)
        max_id = max(max_id, u, v)
    if 0 < n_weighted < len(edges):
        raise GraphError("either every edge or no edge may carry a weight")
    return Graph(max_id + 1, edges, weights if n_weighted else None, name=name)


def load_graph(path: str) -> Graph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_edge_list(text, name=os.path.splitext(os.path.basename(path))[0])


def format_edge_list(g: Graph) -> str:
    lines = []
    for u, v in g.edges:
        if g.weighted:
            lines.append(f"{u} {v} {g.weight(u, v)!r}")
        else:
            lines.append(f"{u} {v}")
    return "\n".join(lines) + ("\n" if lines else "")


def save_graph(g: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g))


# -- paths ------------------------------------------------------------------

def is_closed(path: Sequence[int]) -> bool:
    return len(path) > 3 and path[0] == path[-1]


def path_vertices(path: Sequence[int]) -> list[int]:
    """Distinct vertices of a path (drops the repeated closing vertex)."""
    return list(path[:-1]) if is_closed(path) else list(path)


def path_edges(path: Sequence[int]) -> list[Edge]:
    return [_key(path[i], path[i + 1]) for i in range(len(path) - 1)]


def check_path(g: Graph, path: Sequence[int]) -> None:
    """Raise :class:`GraphError` unless ``path`` is a path of ``g``.

    A closed loop repeats its first vertex at the end and has at least three
    distinct vertices.
    """
    if len(path) == 0:
        raise GraphError("empty path")
    for v in path:
        if not 0 <= v < g.num_vertices:
            raise GraphError(f"path vertex {v} not in graph")
    verts = path_vertices(path)
    if len(set(verts)) != len(verts):
        raise GraphError(f"path {list(path)} revisits a vertex")
    for i in range(len(path) - 1):
        if not g.has_edge(path[i], path[i + 1]):
            raise GraphError(f"path {list(path)} uses non-edge ({path[i]}, {path[i + 1]})")


def is_non_extendable(g: Graph, path: Sequence[int]) -> bool:
    check_path(g, path)
    if len(path) == 1 or is_closed(path):
        return True
    return path[0] in g.boundary and path[-1] in g.boundary


def are_parallel(p1: Sequence[int], p2: Sequence[int]) -> bool:
    # vertex-disjoint paths share no edges either
    return not set(p1) & set(p2)


# -- constructions ---------------------------------------------------------

def product(g1: Graph, g2: Graph) -> Graph:
    """Cartesian product; vertex ``(a, b)`` gets id ``a * |V2| + b``."""
    n2 = g2.num_vertices
    edges = []
    for a in range(g1.num_vertices):
        for u, v in g2.edges:
            edges.append((a * n2 + u, a * n2 + v))
    for u, v in g1.edges:
        for b in range(n2):
            edges.append((u * n2 + b, v * n2 + b))
    return Graph(g1.num_vertices * n2, edges, name=f"{g1.name}x{g2.name}")


def path_graph(n: int, name: str = "path") -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)], name=name)


def star_graph(leaves: int, name: str = "star") -> Graph:
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)], name=name)


def lattice_graph(height: int, width: int, diagonals: bool = False) -> Graph:
    """Grid graph, vertex ``(r, c)`` has id ``r * width + c``."""
    edges = []
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                edges.append((v, v + 1))
            if r + 1 < height:
                edges.append((v, v + width))
                if diagonals:
                    if c + 1 < width:
                        edges.append((v, v + width + 1))
                    if c > 0:
                        edges.append((v, v + width - 1))
    tag = "-diag" if diagonals else ""
    return Graph(height * width, edges, name=f"lattice-{height}x{width}{tag}")


def from_networkx(nxg, name: str = "graph") -> Graph:
    nodes = sorted(nxg.nodes())
    if nodes != list(range(len(nodes))):
        raise GraphError("networkx graph must use vertex labels 0..n-1")
    return Graph(len(nodes), list(nxg.edges()), name=name)


def to_networkx(g: Graph):
    import networkx as nx

    h = nx.Graph()
    h.add_nodes_from(range(g.num_vertices))
    if g.weighted:
        h.add_weighted_edges_from((u, v, g.weight(u, v)) for u, v in g.edges)
    else:
        h.add_edges_from(g.edges)
    return h
