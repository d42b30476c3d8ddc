"""SIRI spreading snapshots, the Jordan-center estimator and top-x% hits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .graph import Graph, GraphError

SUSCEPTIBLE, INFECTED, RECOVERED = 0, 1, 2


@dataclass
class SimParams:
    p_infect: float = 0.5
    p_recover: float = 0.1
    stop_fraction: float = 0.2
    max_steps: int = 1000
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("p_infect", "p_recover"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.stop_fraction <= 1.0:
            raise ValueError(f"stop_fraction must lie in (0, 1], got {self.stop_fraction}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")


@dataclass
class Snapshot:
    infected: np.ndarray  # bool per vertex, recovered vertices read as un-infected
    source: int
    steps_taken: int
    p_infect: float = float("nan")
    p_recover: float = float("nan")

    def signal(self) -> np.ndarray:
        return self.infected.astype(np.float64)

    def infected_vertices(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.infected)]

    def to_dict(self) -> dict:
        return {
            "infected": [int(b) for b in self.infected],
            "source": int(self.source),
            "p_i": self.p_infect,
            "p_r": self.p_recover,
            "steps": int(self.steps_taken),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Snapshot":
        return cls(
            np.asarray(d["infected"], dtype=bool),
            int(d["source"]),
            int(d.get("steps", 0)),
            float(d.get("p_i", float("nan"))),
            float(d.get("p_r", float("nan"))),
        )


def _directed_edges(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(g.edges, dtype=np.intp).reshape(-1, 2)
    return np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]])


def simulate(
    g: Graph,
    params: SimParams,
    rng: Optional[np.random.Generator] = None,
    source: Optional[int] = None,
) -> Snapshot:
    """Run synchronous SIRI rounds from a uniformly drawn (or given) source.

    Each round first lets every infected vertex recover with ``p_recover``;
    vertices still infected then infect each non-infected neighbour
    (susceptible or recovered) with ``p_infect``.  Stops once the infected
    fraction reaches ``stop_fraction``, after ``max_steps`` rounds, or when
    nobody is infected.
    """
    n = g.num_vertices
    if n == 0:
        raise GraphError("cannot simulate on an empty graph")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if source is None:
        source = int(rng.integers(n))
    g.check_vertex(source)
    src, dst = _directed_edges(g)
    state = np.zeros(n, dtype=np.int8)
    state[source] = INFECTED
    steps = 0
    while True:
        inf = state == INFECTED
        count = int(inf.sum())
        if count == 0 or count >= params.stop_fraction * n or steps >= params.max_steps:
            break
        recover = inf & (rng.random(n) < params.p_recover)
        spreaders = inf & ~recover
        active = spreaders[src] & (state[dst] != INFECTED)
        hits = active & (rng.random(src.size) < params.p_infect)
        state[recover] = RECOVERED
        state[dst[hits]] = INFECTED
        steps += 1
    return Snapshot(state == INFECTED, source, steps, params.p_infect, params.p_recover)


def make_dataset(
    g: Graph,
    n_samples: int,
    seed: int = 0,
    p_infect_range: tuple[float, float] = (0.1, 0.9),
    p_recover_range: tuple[float, float] = (0.0, 0.3),
    stop_fraction: float = 0.2,
    max_steps: int = 1000,
) -> list[Snapshot]:
    """Snapshots with per-sample rates drawn uniformly from the given ranges.

    Sample ``i`` uses its own generator seeded by ``(seed, i)``; a run that
    dies out before observation is redrawn from the same generator.
    """
    out = []
    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        for _ in range(1000):
            pi = float(rng.uniform(*p_infect_range))
            pr = float(rng.uniform(*p_recover_range))
            snap = simulate(g, SimParams(pi, pr, stop_fraction, max_steps), rng)
            if snap.infected.any():
                break
        else:
            raise RuntimeError(f"sample {i}: every simulation died out; lower the recovery range")
        out.append(snap)
    return out


def dataset_arrays(snaps: Sequence[Snapshot]) -> tuple[np.ndarray, np.ndarray]:
    """Signals ``[N, V]`` (1.0 infected) and source labels ``[N]``."""
    if not snaps:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    X = np.stack([s.signal() for s in snaps])
    y = np.asarray([s.source for s in snaps], dtype=np.int64)
    return X, y


def save_dataset(snaps: Iterable[Snapshot], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in snaps:
            fh.write(json.dumps(s.to_dict(), separators=(",", ":")) + "\n")


def load_dataset(path: str) -> list[Snapshot]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(Snapshot.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"line {lineno}: bad snapshot record ({e})") from None
    return out


# -- estimators -------------------------------------------------------------------

def _csgraph(g: Graph) -> csr_matrix:
    src, dst = _directed_edges(g)
    n = g.num_vertices
    return csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))


def eccentricities(g: Graph, infected: Iterable[int], csgraph: Optional[csr_matrix] = None) -> np.ndarray:
    """``max_{u in I} d(u, v)`` for every vertex ``v`` (hop distances, ``inf`` if unreachable)."""
    I = sorted(set(int(v) for v in infected))
    if not I:
        raise ValueError("the infected set is empty")
    for v in I:
        g.check_vertex(v)
    cs = _csgraph(g) if csgraph is None else csgraph
    D = shortest_path(cs, method="D", unweighted=True, directed=False, indices=I)
    return np.atleast_2d(D).max(axis=0)


def jordan_center(g: Graph, infected: Iterable[int]) -> list[int]:
    """All vertices of minimum eccentricity with respect to the infected set."""
    ecc = eccentricities(g, infected)
    return [int(v) for v in np.flatnonzero(ecc == ecc.min())]


def jordan_scores(g: Graph, infected: Iterable[int], csgraph: Optional[csr_matrix] = None) -> np.ndarray:
    """Higher is more central: negated eccentricity."""
    return -eccentricities(g, infected, csgraph)


def source_rank(scores: Sequence[float], source: int) -> int:
    """1-based rank of ``source`` by descending score, ties to the lower id."""
    s = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(s.size), -s))
    return int(np.flatnonzero(order == source)[0]) + 1


def topx_accuracy(scores: Sequence[float], true_source: int, x_percent: float) -> bool:
    if not 0.0 < x_percent <= 100.0:
        raise ValueError(f"x_percent must lie in (0, 100], got {x_percent}")
    n = len(scores)
    if not 0 <= true_source < n:
        raise ValueError(f"source {true_source} outside 0..{n - 1}")
    k = math.ceil(round(x_percent * n / 100.0, 9))
    return source_rank(scores, true_source) <= k


def topx_rate(score_rows: Sequence[Sequence[float]], sources: Sequence[int], x_percent: float) -> float:
    if len(sources) == 0:
        raise ValueError("no samples to evaluate")
    hits = sum(topx_accuracy(s, int(t), x_percent) for s, t in zip(score_rows, sources))
    return hits / len(sources)


def jordan_topx(g: Graph, snaps: Sequence[Snapshot], x_percent: float) -> float:
    cs = _csgraph(g)
    rows = [jordan_scores(g, s.infected_vertices(), cs) for s in snaps]
    return topx_rate(rows, [s.source for s in snaps], x_percent)
