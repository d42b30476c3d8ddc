"""Exact realization of polynomial graph filters ``p(S) X`` as flow networks.

Given a cover with full edge coverage and no edge on two paths, one fixed
convolution (filter ``(1, 0, 1)`` for adjacency-type operators or
``(-1, 1, -1)`` for Laplacian-type ones, with operator-valued taps) followed
by a sum or average fusion applies ``S`` exactly.  Powers stack such pairs and
lower-degree terms enter through skip connections from the input, with each
receiving convolution scaled so the coefficients come out right (Horner's
scheme).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import operators
from .flows import FlowCover, coverage
from .graph import Graph
from .model import GFCN, Conv, Fusion, ModelSpec, Scale


class EquivalenceError(ValueError):
    pass


@dataclass(frozen=True)
class Polynomial:
    """``sum(coeffs[k] * x**k)`` with only non-zero coefficients stored."""

    coeffs: tuple  # ((degree, coefficient), ...) ascending by degree

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, float]) -> "Polynomial":
        items = []
        for k, a in coeffs.items():
            k, a = int(k), float(a)
            if k < 0:
                raise EquivalenceError(f"negative degree {k}")
            if a != 0.0:
                items.append((k, a))
        if not items:
            raise EquivalenceError("the zero polynomial has no terms")
        return cls(tuple(sorted(items)))

    @classmethod
    def from_list(cls, coeffs) -> "Polynomial":
        """Coefficients in ascending degree order, ``[a0, a1, ...]``."""
        return cls.from_mapping(dict(enumerate(coeffs)))

    @property
    def degree(self) -> int:
        return self.coeffs[-1][0]

    def as_dict(self) -> dict[int, float]:
        return dict(self.coeffs)

    def __str__(self) -> str:
        parts = []
        for k, a in reversed(self.coeffs):
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            parts.append(f"{a:g}{'*' if mono else ''}{mono}")
        return " + ".join(parts).replace("+ -", "- ")


_TERM = re.compile(r"([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*(x(?:\s*\^\s*(\d+))?)?")


def parse_polynomial(text: str) -> Polynomial:
    """Parse e.g. ``"2x^3 - x + 0.5"`` or a comma list ``"0.5,-1,0,2"`` (ascending)."""
    text = text.strip()
    if not text:
        raise EquivalenceError("empty polynomial")
    if "x" not in text:
        try:
            return Polynomial.from_list([float(t) for t in text.split(",")])
        except ValueError:
            raise EquivalenceError(f"cannot parse polynomial {text!r}") from None
    coeffs: dict[int, float] = {}
    pos = 0
    body = text.replace(" ", "")
    while pos < len(body):
        m = _TERM.match(body, pos)
        if not m or m.end() == pos or (not m.group(2) and not m.group(3)):
            raise EquivalenceError(f"cannot parse polynomial {text!r} at {body[pos:]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        deg = 0 if not m.group(3) else int(m.group(4) or 1)
        coeffs[deg] = coeffs.get(deg, 0.0) + sign * num
        pos = m.end()
    return Polynomial.from_mapping(coeffs)


def dense_apply(poly: Polynomial, S: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Reference ``p(S) X`` by Horner's scheme on dense matrices."""
    d = poly.as_dict()
    Y = d.get(poly.degree, 0.0) * X
    for k in range(poly.degree - 1, -1, -1):
        Y = S @ Y + d.get(k, 0.0) * X
    return Y


_BASE_FILTER = {"A": (1.0, 0.0, 1.0), "Atilde": (1.0, 0.0, 1.0), "L": (-1.0, 1.0, -1.0), "Ltilde": (-1.0, 1.0, -1.0)}


def check_cover(g: Graph, cover: FlowCover) -> None:
    """Reject covers on which conv + fusion does not reproduce the operator."""
    if coverage(g, cover.flows) < 1.0:
        raise EquivalenceError("cover must contain every edge (epsilon = 1)")
    rep = cover.repeated_edges()
    if rep:
        u, v = sorted(rep)[0]
        raise EquivalenceError(f"edge ({u}, {v}) lies on more than one path")
    seen = cover.vertices()
    missing = [v for v in range(g.num_vertices) if v not in seen]
    if missing:
        raise EquivalenceError(f"vertex {missing[0]} is not on any path")


def compile_spec(poly: Polynomial, kind: str, channels: int = 1) -> ModelSpec:
    """Layer stack realizing ``p(S)``: one conv + fusion pair per power of ``S``."""
    kind = operators.normalize_kind(kind)
    fuse = "avg" if operators.uses_average(kind) else "sum"
    degs = [k for k, _ in poly.coeffs]
    coef = dict(poly.coeffs)
    top = poly.degree
    layers, skips = [], []
    # conv j (1-based) receives the term of degree top - j + 1
    scale = {}
    prev = 1.0
    for k in degs:
        if k == 0:
            prev = coef[0]  # applied by the trailing scale layer
            continue
        scale[top - k + 1] = coef[k] / prev
        prev = coef[k]
    for j in range(1, top + 1):
        c = scale.get(j, 1.0)
        filt = [c * f for f in _BASE_FILTER[kind]]
        layers.append(Conv(channels, n=3, taps=kind, filter=filt, bias=False))
        layers.append(Fusion(fuse))
        if j > 1 and j in scale:
            skips.append((0, 2 * j - 1))
    if degs[0] == 0:
        layers.append(Scale(coef[0]))
        if top > 0:
            skips.append((0, len(layers)))
    return ModelSpec(layers, skips)


def compile_polynomial(
    poly: Polynomial, kind: str, g: Graph, cover: FlowCover, channels: int = 1
) -> GFCN:
    check_cover(g, cover)
    return GFCN(compile_spec(poly, kind, channels), cover, in_channels=channels, graph=g)


def max_deviation(
    poly: Polynomial,
    kind: str,
    g: Graph,
    cover: FlowCover,
    X: Optional[np.ndarray] = None,
    seed: int = 0,
) -> float:
    """Largest absolute difference between the compiled network and dense ``p(S) X``."""
    if X is None:
        X = np.random.default_rng(seed).normal(size=(g.num_vertices, 2))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    model = compile_polynomial(poly, kind, g, cover, X.shape[1])
    got = model(X).data
    want = dense_apply(poly, operators.shift_matrix(kind, g), X)
    return float(np.max(np.abs(got - want)))


def verify(
    poly: Polynomial, kind: str, g: Graph, cover: FlowCover, trials: int = 3, seed: int = 0, channels: int = 2
) -> float:
    """Maximum deviation over ``trials`` random Gaussian signals."""
    rng = np.random.default_rng(seed)
    model = compile_polynomial(poly, kind, g, cover, channels)
    S = operators.shift_matrix(kind, g)
    worst = 0.0
    for _ in range(trials):
        X = rng.normal(size=(g.num_vertices, channels))
        worst = max(worst, float(np.max(np.abs(model(X).data - dense_apply(poly, S, X)))))
    return worst


def layer_count(poly: Polynomial) -> int:
    """Number of layers in the compiled stack (conv, fusion and the optional scale)."""
    return len(compile_spec(poly, "A").layers)
