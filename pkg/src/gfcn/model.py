"""Convolutional networks over parallel flows.

A model is a ``ModelSpec`` (an ordered list of layer configs plus skip
connections) compiled against a ``FlowCover``.  Activations inside the flow
part of the network are kept per flow as one packed tensor ``[B, P, C]``
whose positions concatenate every path of that flow; a ``FlowLayout`` maps
packed positions back to graph vertices.  Convolution and pooling act on each
path independently, fusion mixes values of the same vertex across flows, and
flatten / readout leave the flow representation.

Layers are numbered from 1; number 0 denotes the input signal in skip
connections.  A skip ``(s, t)`` adds the output of layer ``s`` to the input
of layer ``t``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Any, ClassVar, Optional, Sequence, Union

import numpy as np

from . import functional as F
from . import operators
from . import tensor as T
from .flows import FlowCover
from .graph import Graph
from .tensor import Tensor


class ModelError(ValueError):
    pass


# -- layer configs ---------------------------------------------------------------

TAP_KINDS = ("ones", "edge") + operators.KINDS


@dataclass
class Conv:
    """1D convolution along every path.

    ``taps`` scales each window tap by a constant: ``"edge"`` uses the product
    of edge weights between the centre and the tap, and a shift-operator name
    (``A``, ``Atilde``, ``L``, ``Ltilde``) uses the operator entries so that a
    conv + fusion pair applies that operator exactly.  ``filter`` fixes the
    filter to per-tap scalars applied channel-wise (no trainable weights).
    """

    channels: int
    n: int = 3
    stride: int = 1
    padding: Union[int, str] = "same"
    taps: str = "ones"
    share_across_flows: bool = False
    bias: bool = True
    filter: Optional[list] = None
    kind: ClassVar[str] = "conv"


@dataclass
class Pool:
    n: int = 3
    stride: int = 2
    mode: str = "max"
    kind: ClassVar[str] = "pool"


@dataclass
class Fusion:
    """Replace each position's value by a reduction over all copies of its vertex."""

    fn: str = "max"
    kind: ClassVar[str] = "fusion"


@dataclass
class Attention:
    """Learn tap weights for the next convolution.

    Each window tap gets the score ``leaky_relu(a . [W h_centre || W h_tap])``,
    normalized by a softmax over the window.  Features come from the current
    activations or, with ``source="input"``, from the raw input signal.
    """

    param_dim: int = 8
    source: str = "current"
    slope: float = 0.2
    share_across_flows: bool = False
    kind: ClassVar[str] = "attention"


@dataclass
class Activation:
    fn: str = "relu"
    slope: float = 0.01
    kind: ClassVar[str] = "activation"


@dataclass
class Flatten:
    kind: ClassVar[str] = "flatten"


@dataclass
class Readout:
    """Collect one row per vertex by reducing over all its positions.

    Vertices that no flow reaches get a learned projection of their input
    features instead.
    """

    fn: str = "avg"
    kind: ClassVar[str] = "readout"


@dataclass
class Dense:
    out: int
    bias: bool = True
    kind: ClassVar[str] = "dense"


@dataclass
class Scale:
    factor: float = 1.0
    kind: ClassVar[str] = "scale"


LAYER_TYPES = {
    c.kind: c for c in (Conv, Pool, Fusion, Attention, Activation, Flatten, Readout, Dense, Scale)
}
Layer = Union[Conv, Pool, Fusion, Attention, Activation, Flatten, Readout, Dense, Scale]


def layer_to_dict(layer: Layer) -> dict:
    return {"type": layer.kind, **asdict(layer)}


def layer_from_dict(d: dict) -> Layer:
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in LAYER_TYPES:
        raise ModelError(f"unknown layer type {kind!r}")
    cls = LAYER_TYPES[kind]
    names = {f.name for f in fields(cls)}
    extra = set(d) - names
    if extra:
        raise ModelError(f"{kind} layer got unknown fields {sorted(extra)}")
    try:
        return cls(**d)
    except TypeError as e:
        raise ModelError(f"{kind} layer: {e}") from None


@dataclass
class ModelSpec:
    layers: list = field(default_factory=list)
    skips: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "layers": [layer_to_dict(l) for l in self.layers],
            "skips": [list(s) for s in self.skips],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if not isinstance(d, dict) or "layers" not in d:
            raise ModelError("model spec needs a 'layers' list")
        return cls(
            [layer_from_dict(l) for l in d["layers"]],
            [tuple(int(v) for v in s) for s in d.get("skips", [])],
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


# -- layouts ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlowLayout:
    """Packed positions of one flow's paths.

    ``index_map[p]`` is the vertex at packed position ``p`` and
    ``positions[p]`` its index in the original path.  Path ``i`` occupies
    ``offsets[i]:offsets[i+1]``.  Closed loops omit the repeated end vertex.
    """

    paths: tuple
    closed: tuple
    offsets: np.ndarray
    index_map: np.ndarray
    positions: np.ndarray

    @classmethod
    def from_paths(cls, paths: Sequence[Sequence[int]]) -> "FlowLayout":
        seqs, closed = [], []
        for p in paths:
            p = tuple(int(v) for v in p)
            c = len(p) > 3 and p[0] == p[-1]
            seqs.append(p[:-1] if c else p)
            closed.append(c)
        lengths = [len(s) for s in seqs]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.intp)
        flat = [v for s in seqs for v in s]
        pos = [i for s in seqs for i in range(len(s))]
        return cls(
            tuple(seqs), tuple(closed), offsets,
            np.asarray(flat, dtype=np.intp), np.asarray(pos, dtype=np.intp),
        )

    @property
    def num_positions(self) -> int:
        return int(self.offsets[-1])

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def path_vertices(self, i: int) -> np.ndarray:
        return self.index_map[self.offsets[i] : self.offsets[i + 1]]

    def same_as(self, other: "FlowLayout") -> bool:
        return np.array_equal(self.offsets, other.offsets) and np.array_equal(
            self.index_map, other.index_map
        )

    def is_unpooled(self) -> bool:
        return all(
            np.array_equal(self.positions[a:b], np.arange(b - a))
            for a, b in zip(self.offsets[:-1], self.offsets[1:])
        )

    def subsample(self, centers: Sequence[np.ndarray]) -> "FlowLayout":
        """Layout after a strided operation keeping the given local centres per path."""
        lengths = [len(c) for c in centers]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.intp)
        glob = np.concatenate([o + c for o, c in zip(self.offsets[:-1], centers)]).astype(np.intp)
        return FlowLayout(self.paths, self.closed, offsets, self.index_map[glob], self.positions[glob])


@dataclass
class FlowActivation:
    """Values of one flow: ``values[..., p, c]`` sits at vertex ``layout.index_map[p]``."""

    values: Tensor
    layout: FlowLayout

    @property
    def index_map(self) -> np.ndarray:
        return self.layout.index_map

    def path_values(self, i: int) -> np.ndarray:
        a, b = self.layout.offsets[i], self.layout.offsets[i + 1]
        return self.values.data[..., a:b, :]


def flow_layouts(cover: FlowCover) -> list[FlowLayout]:
    return [FlowLayout.from_paths(f) for f in cover.flows]


def occurrence_counts(layouts: Sequence[FlowLayout], num_vertices: int) -> np.ndarray:
    occ = np.zeros(num_vertices, dtype=np.int64)
    for lay in layouts:
        np.add.at(occ, lay.index_map, 1)
    return occ


# -- window index construction -----------------------------------------------

def _conv_padding(layer: Conv, length: int) -> int:
    if layer.padding == "same":
        p = (layer.n - 1) // 2
    elif isinstance(layer.padding, int) and not isinstance(layer.padding, bool) and layer.padding >= 0:
        p = layer.padding
    else:
        raise ModelError(f"conv padding must be 'same' or a non-negative int, got {layer.padding!r}")
    if F.conv_out_length(length, layer.n, layer.stride, p) < 1:
        # paths shorter than the filter still produce one output
        p = -(-(layer.n - length) // 2)
    return p


def _conv_windows(layer: Conv, lay: FlowLayout):
    idxs, cents = [], []
    for i, (a, L) in enumerate(zip(lay.offsets[:-1], lay.lengths())):
        closed = lay.closed[i]
        pad = 0 if closed else _conv_padding(layer, int(L))
        idx, c = F.conv_index(int(L), layer.n, layer.stride, pad, closed)
        idxs.append(np.where(idx >= 0, idx + a, -1))
        cents.append(c)
    idx = np.concatenate(idxs) if idxs else np.zeros((0, layer.n), dtype=np.intp)
    return idx.astype(np.intp), cents


def _pool_windows(layer: Pool, lay: FlowLayout):
    idxs, cents = [], []
    for i, (a, L) in enumerate(zip(lay.offsets[:-1], lay.lengths())):
        idx, c = F.pool_index(int(L), layer.n, layer.stride, lay.closed[i])
        idxs.append(np.where(idx >= 0, idx + a, -1))
        cents.append(c)
    idx = np.concatenate(idxs) if idxs else np.zeros((0, layer.n), dtype=np.intp)
    return idx.astype(np.intp), cents


def _edge_taps(g: Graph, lay: FlowLayout, idx: np.ndarray, centers: list) -> np.ndarray:
    """Product of edge weights along the path between each window centre and tap."""
    taps = np.zeros(idx.shape)
    half = idx.shape[1] // 2
    row = 0
    for i, path in enumerate(lay.paths):
        closed = lay.closed[i]
        verts = list(path) + ([path[0]] if closed else [])
        pre = np.concatenate([[1.0], np.cumprod([g.weight(a, b) for a, b in zip(verts, verts[1:])])])
        full = pre[-1]
        base = lay.offsets[i]
        for k in centers[i]:
            pc = lay.positions[base + k]
            for j in range(idx.shape[1]):
                t = idx[row, j]
                if t < 0:
                    continue
                pt = lay.positions[t]
                lo, hi = (pc, pt) if (j >= half) else (pt, pc)
                if closed and hi < lo:
                    taps[row, j] = full / pre[lo] * pre[hi]
                else:
                    a, b = min(lo, hi), max(lo, hi)
                    taps[row, j] = pre[b] / pre[a]
            row += 1
    return taps


def _operator_taps(kind: str, g: Graph, lay: FlowLayout, idx, cent_glob, occ) -> np.ndarray:
    deg = g.degrees()
    vc = lay.index_map[cent_glob]
    taps = np.zeros(idx.shape)
    for j in range(3):
        t = idx[:, j]
        valid = t >= 0
        if j == 1:
            taps[:, j] = [operators.diagonal(kind, deg[v]) / occ[v] for v in vc]
        else:
            vt = lay.index_map[np.where(valid, t, 0)]
            taps[:, j] = [
                operators.off_diagonal(kind, deg[v], deg[u]) if ok else 0.0
                for v, u, ok in zip(vc, vt, valid)
            ]
    if operators.uses_average(kind):
        taps *= occ[vc][:, None]
    return taps


# -- compiled steps ----------------------------------------------------------

@dataclass
class _Meta:
    kind: str  # "flows", "vertices" or "flat"
    channels: int
    layouts: Optional[list] = None

    def describe(self) -> str:
        if self.kind == "flows":
            return f"flows x{len(self.layouts)} with {self.channels} channels"
        return f"{self.kind} with {self.channels} features"


class GFCN:
    """A flow-convolutional network bound to a cover.

    ``forward`` accepts a signal shaped ``[V]``, ``[V, C]`` or ``[B, V, C]``
    and returns ``[..., V, K]`` for per-vertex heads (readout or a trailing
    flow layer) or ``[..., K]`` after flatten.
    """

    def __init__(
        self,
        spec: ModelSpec,
        cover: FlowCover,
        in_channels: int = 1,
        graph: Optional[Graph] = None,
        seed: int = 0,
    ):
        if not cover.flows:
            raise ModelError("cannot build a model on an empty cover")
        self.spec = spec
        self.cover = cover
        self.graph = graph
        self.num_vertices = cover.num_vertices
        self.in_channels = in_channels
        self.seed = seed
        self.params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(seed)
        self._steps: list[dict] = []
        self._compile()

    # construction ----------------------------------------------------------

    def _param(self, name: str, shape, fan_in: int, kind: str = "he") -> Tensor:
        if kind == "zeros":
            data = np.zeros(shape)
        elif kind == "glorot":
            data = self._rng.normal(0.0, np.sqrt(2.0 / (fan_in + shape[-1])), size=shape)
        else:
            data = self._rng.normal(0.0, np.sqrt(2.0 / max(fan_in, 1)), size=shape)
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _compile(self) -> None:
        layers = self.spec.layers
        nl = len(layers)
        skips: dict[int, list[int]] = {}
        for s, t in self.spec.skips:
            if not (0 <= s < t <= nl):
                raise ModelError(f"skip ({s}, {t}) must satisfy 0 <= source < target <= {nl}")
            skips.setdefault(t, []).append(s)
        self._skips = skips
        self._sources = {s for s, _ in self.spec.skips}

        layouts = flow_layouts(self.cover)
        meta = _Meta("flows", self.in_channels, layouts)
        metas = [meta]
        self._input_layouts = layouts
        pending_attn = None
        for i, layer in enumerate(layers, start=1):
            for s in skips.get(i, []):
                self._check_skip(s, i, metas[s], meta)
            if pending_attn is not None and not isinstance(layer, Conv):
                raise ModelError(f"attention layer {i - 1} must be followed by a conv layer")
            step: dict[str, Any] = {"layer": layer, "index": i}
            if isinstance(layer, Conv):
                meta = self._build_conv(step, layer, meta, pending_attn)
                pending_attn = None
            elif isinstance(layer, Pool):
                meta = self._build_pool(step, layer, meta)
            elif isinstance(layer, Fusion):
                self._need(meta, "flows", i, "fusion")
                if layer.fn not in ("max", "avg", "sum"):
                    raise ModelError(f"fusion function must be max, avg or sum, got {layer.fn!r}")
                step["ids"] = np.concatenate([l.index_map for l in meta.layouts])
                step["counts"] = np.maximum(occurrence_counts(meta.layouts, self.num_vertices), 1)
                step["splits"] = np.cumsum([0] + [l.num_positions for l in meta.layouts])
            elif isinstance(layer, Attention):
                self._need(meta, "flows", i, "attention")
                if layer.source not in ("current", "input"):
                    raise ModelError(f"attention source must be 'current' or 'input', got {layer.source!r}")
                cin = meta.channels if layer.source == "current" else self.in_channels
                nf = 1 if layer.share_across_flows else len(meta.layouts)
                names = []
                for f in range(nf):
                    base = f"{i}.attention.{f}"
                    self._param(base + ".W", (cin, layer.param_dim), cin, "glorot")
                    self._param(base + ".a_center", (layer.param_dim,), layer.param_dim, "glorot")
                    self._param(base + ".a_tap", (layer.param_dim,), layer.param_dim, "glorot")
                    names.append(base)
                pending_attn = {"layer": layer, "names": names}
            elif isinstance(layer, Activation):
                if layer.fn not in ("relu", "leaky_relu", "tanh", "none"):
                    raise ModelError(f"unknown activation {layer.fn!r}")
            elif isinstance(layer, Flatten):
                self._need(meta, "flows", i, "flatten")
                meta = _Meta("flat", meta.channels * sum(l.num_positions for l in meta.layouts))
            elif isinstance(layer, Readout):
                self._need(meta, "flows", i, "readout")
                if layer.fn not in ("max", "avg", "sum"):
                    raise ModelError(f"readout function must be max, avg or sum, got {layer.fn!r}")
                occ = occurrence_counts(meta.layouts, self.num_vertices)
                step["ids"] = np.concatenate([l.index_map for l in meta.layouts])
                step["counts"] = np.maximum(occ, 1)
                step["uncovered"] = (occ == 0).astype(np.float64)
                if occ.min() == 0:
                    self._param(f"{i}.readout.bypass", (self.in_channels, meta.channels), self.in_channels)
                meta = _Meta("vertices", meta.channels)
            elif isinstance(layer, Dense):
                if meta.kind == "flows":
                    raise ModelError(f"dense layer {i} needs flatten or readout first")
                if layer.out < 1:
                    raise ModelError(f"dense layer {i} needs a positive output size")
                self._param(f"{i}.dense.weight", (meta.channels, layer.out), meta.channels)
                if layer.bias:
                    self._param(f"{i}.dense.bias", (layer.out,), 0, "zeros")
                meta = _Meta(meta.kind, layer.out)
            elif isinstance(layer, Scale):
                pass
            else:
                raise ModelError(f"unsupported layer {layer!r}")
            self._steps.append(step)
            metas.append(meta)
        if pending_attn is not None:
            raise ModelError("the last attention layer is not followed by a conv layer")
        self._metas = metas
        self.output_meta = meta

    @staticmethod
    def _need(meta: _Meta, kind: str, i: int, what: str) -> None:
        if meta.kind != kind:
            raise ModelError(f"{what} layer {i} needs {kind} input, got {meta.describe()}")

    @staticmethod
    def _check_skip(s: int, t: int, src: _Meta, dst: _Meta) -> None:
        ok = src.kind == dst.kind and src.channels == dst.channels
        if ok and src.kind == "flows":
            ok = len(src.layouts) == len(dst.layouts) and all(
                a.same_as(b) for a, b in zip(src.layouts, dst.layouts)
            )
        if not ok:
            raise ModelError(
                f"skip from layer {s} ({src.describe()}) does not match the input of "
                f"layer {t} ({dst.describe()})"
            )

    def _build_conv(self, step, layer: Conv, meta: _Meta, attn) -> _Meta:
        i = step["index"]
        self._need(meta, "flows", i, "conv")
        if layer.n < 1 or layer.stride < 1 or layer.channels < 1:
            raise ModelError(f"conv layer {i} needs positive n, stride and channels")
        if layer.taps not in TAP_KINDS:
            raise ModelError(f"conv layer {i}: taps must be one of {TAP_KINDS}")
        cin = meta.channels
        occ = occurrence_counts(meta.layouts, self.num_vertices)
        windows, new_layouts = [], []
        for lay in meta.layouts:
            idx, cents = _conv_windows(layer, lay)
            glob = np.concatenate([o + c for o, c in zip(lay.offsets[:-1], cents)]).astype(np.intp)
            taps = None
            if layer.taps == "edge":
                if self.graph is None:
                    raise ModelError("edge taps need the graph")
                taps = _edge_taps(self.graph, lay, idx, cents)
            elif layer.taps in operators.KINDS:
                if self.graph is None:
                    raise ModelError(f"{layer.taps} taps need the graph")
                if layer.n != 3 or layer.stride != 1 or not lay.is_unpooled():
                    raise ModelError(
                        f"conv layer {i}: shift-operator taps need n=3, stride 1 and unpooled paths"
                    )
                taps = _operator_taps(layer.taps, self.graph, lay, idx, glob, occ)
            windows.append({"idx": idx, "centers": glob, "taps": taps, "layout": lay})
            new_layouts.append(lay.subsample(cents))
        step["windows"] = windows
        step["attn"] = attn
        if layer.filter is not None:
            filt = np.asarray(layer.filter, dtype=np.float64)
            if filt.shape != (layer.n,):
                raise ModelError(f"conv layer {i}: a fixed filter needs {layer.n} scalars")
            if layer.channels != cin:
                raise ModelError(f"conv layer {i}: a fixed filter keeps the channel count ({cin})")
            step["fixed"] = Tensor(filt[:, None, None] * np.eye(cin)[None])
        else:
            nf = 1 if layer.share_across_flows else len(meta.layouts)
            for f in range(nf):
                self._param(f"{i}.conv.{f}.weight", (layer.n, cin, layer.channels), layer.n * cin)
                if layer.bias:
                    self._param(f"{i}.conv.{f}.bias", (layer.channels,), 0, "zeros")
        return _Meta("flows", layer.channels, new_layouts)

    def _build_pool(self, step, layer: Pool, meta: _Meta) -> _Meta:
        i = step["index"]
        self._need(meta, "flows", i, "pool")
        if layer.mode not in ("max", "avg"):
            raise ModelError(f"pool mode must be max or avg, got {layer.mode!r}")
        windows, new_layouts = [], []
        for lay in meta.layouts:
            idx, cents = _pool_windows(layer, lay)
            windows.append(idx)
            new_layouts.append(lay.subsample(cents))
        step["windows"] = windows
        return _Meta("flows", meta.channels, new_layouts)

    # evaluation -------------------------------------------------------------

    def _run_conv(self, step, xs: list, X: Tensor) -> list:
        layer: Conv = step["layer"]
        i = step["index"]
        out = []
        for f, (x, win) in enumerate(zip(xs, step["windows"])):
            taps = win["taps"]
            if step["attn"] is not None:
                att = self._attention(step["attn"], f, x, X, win)
                taps = att if taps is None else att * taps
            if "fixed" in step:
                w, b = step["fixed"], None
            else:
                g = 0 if layer.share_across_flows else f
                w = self.params[f"{i}.conv.{g}.weight"]
                b = self.params.get(f"{i}.conv.{g}.bias")
            out.append(F.gather_conv(x, win["idx"], w, b, taps))
        return out

    def _attention(self, attn, f: int, x: Tensor, X: Tensor, win) -> Tensor:
        layer: Attention = attn["layer"]
        base = attn["names"][0 if layer.share_across_flows else f]
        src = x
        if layer.source == "input":
            # raw features of the vertices currently at each position
            src = T.take(X, win["layout"].index_map, axis=1)
        h = src @ self.params[base + ".W"]
        sc = h @ self.params[base + ".a_center"]
        st = h @ self.params[base + ".a_tap"]
        idx = win["idx"]
        e = T.reshape(T.take(sc, win["centers"], axis=1), (sc.shape[0], idx.shape[0], 1))
        e = T.leaky_relu(e + T.take(st, idx, axis=1, fill=0.0), layer.slope)
        mask = np.where(idx >= 0, 0.0, -np.inf)
        return T.softmax(e + mask, axis=-1)

    def forward(self, X) -> Tensor:
        X = T.as_tensor(X)
        squeeze = False
        if X.ndim == 1:
            X = T.reshape(X, (1, X.shape[0], 1))
            squeeze = True
        elif X.ndim == 2:
            X = T.reshape(X, (1,) + X.shape)
            squeeze = True
        if X.ndim != 3 or X.shape[1] != self.num_vertices or X.shape[2] != self.in_channels:
            raise ModelError(
                f"expected a signal shaped [B, {self.num_vertices}, {self.in_channels}], got {X.shape}"
            )
        B = X.shape[0]
        state: Any = [T.take(X, lay.index_map, axis=1) for lay in self._input_layouts]
        saved = {0: state} if 0 in self._sources else {}
        for step in self._steps:
            i = step["index"]
            layer = step["layer"]
            for s in self._skips.get(i, []):
                state = _add(state, saved[s])
            if isinstance(layer, Conv):
                state = self._run_conv(step, state, X)
            elif isinstance(layer, Pool):
                state = [F.gather_pool(x, w, layer.mode) for x, w in zip(state, step["windows"])]
            elif isinstance(layer, Fusion):
                state = _fuse(state, step, layer.fn, self.num_vertices)
            elif isinstance(layer, Attention):
                pass
            elif isinstance(layer, Activation):
                state = _map(state, lambda t: _activate(t, layer))
            elif isinstance(layer, Flatten):
                state = T.concat([T.reshape(x, (B, -1)) for x in state], axis=1)
            elif isinstance(layer, Readout):
                state = _reduce(state, step, layer.fn, self.num_vertices)
                if f"{i}.readout.bypass" in self.params:
                    by = X @ self.params[f"{i}.readout.bypass"]
                    state = state + by * step["uncovered"][:, None]
            elif isinstance(layer, Dense):
                state = state @ self.params[f"{i}.dense.weight"]
                if layer.bias:
                    state = state + self.params[f"{i}.dense.bias"]
            elif isinstance(layer, Scale):
                state = _map(state, lambda t: t * layer.factor)
            if i in self._sources:
                saved[i] = state
        if isinstance(state, list):
            ids = np.concatenate([l.index_map for l in self.output_meta.layouts])
            counts = np.maximum(occurrence_counts(self.output_meta.layouts, self.num_vertices), 1)
            state = _reduce(state, {"ids": ids, "counts": counts}, "avg", self.num_vertices)
        if squeeze:
            state = T.reshape(state, state.shape[1:])
        return state

    __call__ = forward

    def flow_activations(self, X) -> list[FlowActivation]:
        """Input signal gathered onto each flow (batch of one)."""
        X = np.asarray(X, dtype=np.float64).reshape(1, self.num_vertices, -1)
        return [FlowActivation(T.take(Tensor(X), l.index_map, axis=1), l) for l in self._input_layouts]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def load_params(self, params: dict) -> None:
        for k, p in self.params.items():
            if k not in params:
                raise ModelError(f"checkpoint is missing parameter {k!r}")
            src = params[k].data if isinstance(params[k], Tensor) else np.asarray(params[k])
            if src.shape != p.shape:
                raise ModelError(f"parameter {k!r} has shape {src.shape}, expected {p.shape}")
            p.data = src.astype(np.float64).copy()


def _map(state, fn):
    return [fn(t) for t in state] if isinstance(state, list) else fn(state)


def _add(a, b):
    if isinstance(a, list):
        return [x + y for x, y in zip(a, b)]
    return a + b


def _activate(t: Tensor, layer: Activation) -> Tensor:
    if layer.fn == "relu":
        return T.relu(t)
    if layer.fn == "leaky_relu":
        return T.leaky_relu(t, layer.slope)
    if layer.fn == "tanh":
        return T.tanh(t)
    return t


def _reduce(xs: list, step, fn: str, V: int) -> Tensor:
    cat = xs[0] if len(xs) == 1 else T.concat(xs, axis=1)
    if fn == "max":
        return T.segment_max(cat, step["ids"], V, axis=1)
    seg = T.segment_sum(cat, step["ids"], V, axis=1)
    if fn == "avg":
        seg = seg * (1.0 / step["counts"])[:, None]
    return seg


def _fuse(xs: list, step, fn: str, V: int) -> list:
    back = T.take(_reduce(xs, step, fn, V), step["ids"], axis=1)
    sp = step["splits"]
    if len(xs) == 1:
        return [back]
    return [T.getitem(back, (slice(None), slice(sp[f], sp[f + 1]))) for f in range(len(xs))]
