"""Parallel flows, epsilon-covers, validation, regularization and flow files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .graph import Edge, Graph, GraphError, check_path, is_closed, path_edges, path_vertices

Path = tuple[int, ...]
ParallelFlow = list[Path]


class CoverError(ValueError):
    pass


def _canonical_path(p: Sequence[int]) -> Path:
    p = tuple(int(v) for v in p)
    if is_closed(p):
        # rotate so the loop starts at its smallest vertex
        body = p[:-1]
        i = body.index(min(body))
        body = body[i:] + body[:i]
        if len(body) > 2 and body[-1] < body[1]:
            body = (body[0],) + tuple(reversed(body[1:]))
        return body + (body[0],)
    if len(p) > 1 and p[-1] < p[0]:
        p = tuple(reversed(p))
    return p


def canonical_flow(paths: Iterable[Sequence[int]]) -> ParallelFlow:
    """Paths with a fixed orientation, sorted by first vertex id."""
    return sorted((_canonical_path(p) for p in paths), key=lambda p: (p[0], p))


def cover_edges(flows: Iterable[Iterable[Sequence[int]]]) -> set[Edge]:
    out: set[Edge] = set()
    for flow in flows:
        for p in flow:
            out.update(path_edges(p))
    return out


def coverage(g: Graph, flows: Iterable[Iterable[Sequence[int]]]) -> float:
    """Fraction of the edges of ``g`` lying on some path; 1.0 for edgeless graphs."""
    if g.num_edges == 0:
        return 1.0
    covered = cover_edges(flows)
    return sum(1 for e in g.edges if e in covered) / g.num_edges


@dataclass
class FlowCover:
    """Ordered parallel flows over a host graph.

    ``epsilon`` is always measured against the graph, never taken on trust.
    """

    flows: list[ParallelFlow]
    epsilon: float
    graph_name: str = "graph"
    num_vertices: int = 0

    @classmethod
    def build(cls, g: Graph, flows: Iterable[Iterable[Sequence[int]]]) -> "FlowCover":
        fl = [canonical_flow(f) for f in flows]
        fl = [f for f in fl if f]
        return cls(fl, coverage(g, fl), g.name, g.num_vertices)

    @property
    def num_flows(self) -> int:
        return len(self.flows)

    def paths(self) -> Iterable[Path]:
        for f in self.flows:
            yield from f

    def edges(self) -> set[Edge]:
        return cover_edges(self.flows)

    def vertices(self) -> set[int]:
        out: set[int] = set()
        for p in self.paths():
            out.update(p)
        return out

    def repeated_edges(self) -> list[Edge]:
        """Edges lying in more than one flow, sorted."""
        owner: dict[Edge, int] = {}
        dup = set()
        for i, f in enumerate(self.flows):
            for p in f:
                for e in path_edges(p):
                    j = owner.setdefault(e, i)
                    if j != i:
                        dup.add(e)
        return sorted(dup)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph_name,
            "epsilon": self.epsilon,
            "num_vertices": self.num_vertices,
            "flows": [[list(p) for p in f] for f in self.flows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=None, separators=(",", ":")) + "\n"


def cover_from_dict(d: dict, g: Optional[Graph] = None) -> FlowCover:
    flows = [[tuple(int(v) for v in p) for p in f] for f in d["flows"]]
    if g is not None:
        return FlowCover.build(g, flows)
    n = int(d.get("num_vertices", 0))
    if n == 0:
        n = 1 + max((v for f in flows for p in f for v in p), default=-1)
    return FlowCover([canonical_flow(f) for f in flows], float(d["epsilon"]), d.get("graph", "graph"), n)


def save_cover(cover: FlowCover, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cover.to_json())


def load_cover(path: str, g: Optional[Graph] = None) -> FlowCover:
    with open(path, encoding="utf-8") as fh:
        return cover_from_dict(json.load(fh), g)


# -- validation -----------------------------------------------------------

@dataclass
class CoverReport:
    epsilon_measured: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_cover(g: Graph, cover: FlowCover | Sequence[Sequence[Sequence[int]]]) -> CoverReport:
    """Check every flow of ``cover`` against ``g`` and its boundary."""
    flows = cover.flows if isinstance(cover, FlowCover) else cover
    violations: list[str] = []
    good_paths: list[list[Sequence[int]]] = []
    for fi, flow in enumerate(flows):
        ok = []
        for p in flow:
            try:
                check_path(g, p)
            except GraphError as exc:
                violations.append(f"flow {fi}: invalid path: {exc}")
                continue
            ok.append(p)
            if not (len(p) == 1 or is_closed(p) or (p[0] in g.boundary and p[-1] in g.boundary)):
                violations.append(f"flow {fi}: path {list(p)} is extendable (ends outside boundary)")
        owner: dict[int, int] = {}
        for pi, p in enumerate(flow):
            for v in set(p):
                j = owner.setdefault(v, pi)
                if j != pi:
                    violations.append(
                        f"flow {fi}: paths {list(flow[j])} and {list(p)} are not parallel (share vertex {v})"
                    )
                    break
        good_paths.append(ok)
    return CoverReport(coverage(g, good_paths), violations)


def flow_count_bound(d_max: int) -> int:
    """Upper bound on flows of a 1-cover of any graph with maximal degree ``d_max``."""
    k = (d_max + 1) // 2
    return (k + 1) * k


def tree_flow_count(d_max: int) -> int:
    return (d_max + 1) // 2


# -- regularization -------------------------------------------------------

def regularize(g: Graph, cover: FlowCover, min_path_len: int = 1, max_path_len: Optional[int] = None) -> FlowCover:
    """Drop paths shorter than ``min_path_len`` vertices, cut longer ones.

    Long paths are split into consecutive segments of ``max_path_len``
    vertices; a trailing remainder survives only if it is long enough.
    """
    if min_path_len < 1:
        raise CoverError("min_path_len must be at least 1")
    if max_path_len is not None and min_path_len > max_path_len:
        raise CoverError(f"min_path_len {min_path_len} exceeds max_path_len {max_path_len}")
    flows = []
    for flow in cover.flows:
        out = []
        for p in flow:
            verts = path_vertices(p)
            if len(verts) < min_path_len:
                continue
            if max_path_len is None or len(verts) <= max_path_len:
                out.append(tuple(p))
                continue
            for s in range(0, len(verts), max_path_len):
                seg = tuple(verts[s : s + max_path_len])
                if len(seg) >= min_path_len:
                    out.append(seg)
        flows.append(out)
    res = FlowCover.build(g, flows)
    res.graph_name = cover.graph_name
    return res


def merge_covers(g: Graph, *covers: FlowCover) -> FlowCover:
    """Union of covers: the flows of each, in order."""
    flows = [f for c in covers for f in c.flows]
    return FlowCover.build(g, flows)


def occurrences(cover: FlowCover, num_vertices: int) -> list[int]:
    occ = [0] * num_vertices
    for p in cover.paths():
        for v in path_vertices(p):
            occ[v] += 1
    return occ
