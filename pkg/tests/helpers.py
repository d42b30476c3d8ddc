"""Random graph generators and reference implementations shared by the tests."""

from __future__ import annotations

import numpy as np

from gfcn.graph import Graph


def random_tree(n: int, max_degree: int, rng: np.random.Generator) -> Graph:
    """Random recursive tree whose vertex degrees never exceed ``max_degree``."""
    deg = [0] * n
    edges = []
    for v in range(1, n):
        open_ = [u for u in range(v) if deg[u] < max_degree]
        u = open_[int(rng.integers(len(open_)))]
        edges.append((u, v))
        deg[u] += 1
        deg[v] += 1
    perm = rng.permutation(n)
    return Graph(n, [(int(perm[a]), int(perm[b])) for a, b in edges])


def random_bounded_graph(n: int, max_degree: int, m: int, rng: np.random.Generator) -> Graph:
    """Up to ``m`` random edges, skipping any that would exceed ``max_degree``."""
    deg = [0] * n
    seen = set()
    for _ in range(m):
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u == v:
            continue
        e = (min(u, v), max(u, v))
        if e in seen or deg[u] >= max_degree or deg[v] >= max_degree:
            continue
        seen.add(e)
        deg[u] += 1
        deg[v] += 1
    return Graph(n, sorted(seen))


def linear_forest_cover_exists(g: Graph, k: int) -> bool:
    """Can the edges be split into ``k`` sets, each a disjoint union of paths?

    On a tree every flow's edge set is such a set and vice versa, so this
    decides whether a ``k``-flow cover with full coverage exists.
    """
    edges = g.edges
    if k <= 0:
        return not edges
    deg = [[0] * g.num_vertices for _ in range(k)]

    def place(i: int) -> bool:
        if i == len(edges):
            return True
        u, v = edges[i]
        tried_empty = False
        for c in range(k):
            if deg[c][u] >= 2 or deg[c][v] >= 2:
                continue
            empty = all(d == 0 for d in deg[c])
            if empty:
                # unused colours are interchangeable
                if tried_empty:
                    continue
                tried_empty = True
            deg[c][u] += 1
            deg[c][v] += 1
            if place(i + 1):
                return True
            deg[c][u] -= 1
            deg[c][v] -= 1
        return False

    return place(0)


def numeric_grad(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar ``f()`` with respect to ``arr`` (in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        fp = f()
        arr[i] = old - h
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """Norm-wise relative error ``||a - b|| / max(||a||, ||b||, floor)``.

    The floor keeps identically-zero gradients from turning round-off into a 100% error.
    """
    den = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / den)
