"""Graph shift operators: adjacency, Laplacian and their normalized forms."""

from __future__ import annotations

import math

import numpy as np

from .graph import Graph

KINDS = ("A", "Atilde", "L", "Ltilde")
_ALIASES = {"a": "A", "adjacency": "A", "atilde": "Atilde", "l": "L", "laplacian": "L", "ltilde": "Ltilde"}


def normalize_kind(kind: str) -> str:
    k = _ALIASES.get(kind.lower(), kind) if kind not in KINDS else kind
    if k not in KINDS:
        raise ValueError(f"unknown shift operator {kind!r}; choose from {KINDS}")
    return k


def shift_matrix(kind: str, g: Graph) -> np.ndarray:
    """Dense operator matrix.

    ``Atilde = D^-1/2 A D^-1/2`` (rows of isolated vertices are zero) and
    ``Ltilde = I - Atilde``.
    """
    kind = normalize_kind(kind)
    n = g.num_vertices
    A = np.zeros((n, n))
    for u, v in g.edges:
        A[u, v] = A[v, u] = 1.0
    deg = A.sum(axis=1)
    if kind == "A":
        return A
    if kind == "L":
        return np.diag(deg) - A
    inv = np.zeros(n)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    At = inv[:, None] * A * inv[None, :]
    return At if kind == "Atilde" else np.eye(n) - At


def off_diagonal(kind: str, deg_v: int, deg_u: int) -> float:
    """|S[v, u]| for adjacent ``v``, ``u``."""
    if kind in ("A", "L"):
        return 1.0
    return 1.0 / math.sqrt(deg_v * deg_u)


def diagonal(kind: str, deg_v: int) -> float:
    if kind == "A" or kind == "Atilde":
        return 0.0
    if kind == "L":
        return float(deg_v)
    return 1.0


def uses_average(kind: str) -> bool:
    """Whether the matching fusion layer averages (normalized operators) or sums."""
    return kind in ("Atilde", "Ltilde")
