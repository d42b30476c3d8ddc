"""A small dense tensor type with reverse-mode differentiation.

Every operation that involves a tensor requiring gradients records its
inputs and a local gradient rule.  :meth:`Tensor.backward` orders the
recorded graph topologically and runs the rules once per node, summing
contributions wherever a tensor feeds several consumers.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_rule", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._rule: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self.op = "leaf"
        self.name = name

    # -- construction helpers ------------------------------------------
    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], rule, op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.name = ""
        out.op = op
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._rule = rule
        else:
            out.requires_grad = False
            out._parents = ()
            out._rule = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # -- differentiation -------------------------------------------------
    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf requiring it."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._rule is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._rule(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # -- operators ---------------------------------------------------------
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __pow__(self, p: float) -> "Tensor":
        return power(self, p)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis, keepdims)

    def max(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmax(self, axis, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        return transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise arithmetic ---------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        ),
        "mul",
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return Tensor._make(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None,
        ),
        "div",
    )


def power(a: ArrayLike, p: float) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1),), "pow")


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out,), "exp")


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._make(out, (a,), lambda g: (g * (1 - out * out),), "tanh")


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a: ArrayLike, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return Tensor._make(a.data * scale, (a,), lambda g: (g * scale,), "leaky_relu")


# -- linear algebra -------------------------------------------------------------

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    A, B = a.data, b.data
    if A.ndim == 0 or B.ndim == 0:
        raise ValueError("matmul needs at least 1-d operands")
    out = A @ B

    def rule(g):
        ga = gb = None
        if B.ndim == 1:
            if a.requires_grad:
                ga = np.multiply.outer(g, B) if A.ndim > 1 else g * B
            if b.requires_grad:
                gb = (A.reshape(-1, A.shape[-1]) * np.reshape(g, (-1, 1))).sum(0) if A.ndim > 1 else g * A
            return ga, gb
        if A.ndim == 1:
            if a.requires_grad:
                ga = B @ g if B.ndim == 2 else _unbroadcast(B @ g[..., None], B.shape[:-2] + (B.shape[-2], 1))[..., 0]
            if b.requires_grad:
                gb = np.multiply.outer(A, g) if B.ndim == 2 else A[:, None] * g[..., None, :]
            return ga, gb
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(B, -1, -2), A.shape)
        if b.requires_grad:
            if B.ndim == 2:
                gb = A.reshape(-1, A.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(A, -1, -2) @ g, B.shape)
        return ga, gb

    return Tensor._make(out, (a, b), rule, "matmul")


# -- reductions and shape ---------------------------------------------------------

def tsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._make(np.asarray(out), (a,), rule, "sum")


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / count)


def tmax(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    """Maximum; the gradient is shared equally among tied maxima."""
    a = as_tensor(a)
    out_k = a.data.max(axis=axis, keepdims=True)
    out = out_k if keepdims else np.asarray(a.data.max(axis=axis))

    def rule(g):
        mask = a.data == out_k
        count = mask.sum(axis=axis, keepdims=True)
        gk = g if keepdims or axis is None else np.expand_dims(g, axis)
        return (mask * (gk / count),)

    return Tensor._make(out, (a,), rule, "max")


def reshape(a: ArrayLike, shape) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: ArrayLike, axes=None) -> Tensor:
    a = as_tensor(a)
    inv = None if axes is None else tuple(np.argsort(axes))
    return Tensor._make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose")


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(p is None or p is Ellipsis or isinstance(p, (slice, int, np.integer)) for p in parts)

    def rule(g):
        out = np.zeros_like(a.data)
        if basic:
            out[index] = g  # no repeated elements, plain assignment suffices
        else:
            np.add.at(out, index, g)
        return (out,)

    return Tensor._make(np.asarray(a.data[index]), (a,), rule, "getitem")


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in ts], axis=axis), ts, rule, "concat")


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    return concat([reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in ts], axis)


# -- gather / scatter ----------------------------------------------------------------

def _scatter_matrix(idx: np.ndarray, n: int) -> sp.csr_matrix:
    flat = idx.ravel()
    return sp.csr_matrix(
        (np.ones(flat.size), (flat, np.arange(flat.size))), shape=(n, flat.size)
    )


def take(a: ArrayLike, idx: np.ndarray, axis: int = 0, fill: Optional[float] = None) -> Tensor:
    """Gather ``a`` along ``axis`` with an integer index array of any shape.

    With ``fill`` set, index ``-1`` selects the constant ``fill`` (which
    receives no gradient).
    """
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    axis = axis % a.ndim
    n = a.shape[axis]
    src = a.data
    if fill is not None:
        pad_shape = list(src.shape)
        pad_shape[axis] = 1
        src = np.concatenate([src, np.full(pad_shape, fill)], axis=axis)
        idx = np.where(idx < 0, n, idx)
    out = np.take(src, idx, axis=axis)
    rows = src.shape[axis]

    def rule(g):
        pre, post = a.shape[:axis], a.shape[axis + 1 :]
        g2 = g.reshape(pre + (idx.size,) + post)
        g2 = np.moveaxis(g2, len(pre), 0).reshape(idx.size, -1)
        gi = _scatter_matrix(idx, rows) @ g2
        gi = gi[:n].reshape((n,) + pre + post)
        return (np.moveaxis(gi, 0, axis),)

    return Tensor._make(out, (a,), rule, "take")


def segment_sum(a: ArrayLike, segment_ids: np.ndarray, num_segments: int, axis: int = 0) -> Tensor:
    """Sum slices of ``a`` along ``axis`` that share a segment id."""
    a = as_tensor(a)
    ids = np.asarray(segment_ids, dtype=np.intp)
    axis = axis % a.ndim
    S = _scatter_matrix(ids, num_segments)
    moved = np.moveaxis(a.data, axis, 0)
    rest = moved.shape[1:]
    out = (S @ moved.reshape(moved.shape[0], -1)).reshape((num_segments,) + rest)
    out = np.moveaxis(out, 0, axis)
    return Tensor._make(out, (a,), lambda g: (np.take(g, ids, axis=axis),), "segment_sum")


def segment_max(
    a: ArrayLike, segment_ids: np.ndarray, num_segments: int, axis: int = 0, empty: float = 0.0
) -> Tensor:
    """Segment-wise maximum; empty segments hold ``empty`` and tied maxima share gradient."""
    a = as_tensor(a)
    ids = np.asarray(segment_ids, dtype=np.intp)
    axis = axis % a.ndim
    moved = np.moveaxis(a.data, axis, 0)
    order = np.argsort(ids, kind="stable")
    sids = ids[order]
    present, starts = np.unique(sids, return_index=True)
    red = np.maximum.reduceat(moved[order], starts, axis=0)
    out_m = np.full((num_segments,) + moved.shape[1:], empty)
    out_m[present] = red
    out = np.moveaxis(out_m, 0, axis)

    def rule(g):
        mask = moved == out_m[ids]
        counts = np.zeros((num_segments,) + moved.shape[1:])
        np.add.at(counts, ids, mask)
        gm = np.moveaxis(g, axis, 0)
        res = mask * gm[ids] / np.maximum(counts[ids], 1)
        return (np.moveaxis(res, 0, axis),)

    return Tensor._make(out, (a,), rule, "segment_max")


# -- softmax family and losses -------------------------------------------------------

def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)
    return Tensor._make(
        p, (a,), lambda g: (p * (g - (g * p).sum(axis=axis, keepdims=True)),), "softmax"
    )


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return Tensor._make(out, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),), "log_softmax")


def cross_entropy(logits: ArrayLike, labels, weights: Optional[np.ndarray] = None) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(``logits``).

    ``logits`` has classes on the last axis; ``weights`` (same shape as
    ``labels``) turns the mean into a weighted mean, e.g. to mask vertices.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    ls = log_softmax(logits, axis=-1)
    picked = np.take_along_axis(ls.data, labels[..., None], axis=-1)[..., 0]
    w = np.ones(labels.shape) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise ValueError("cross_entropy needs at least one weighted sample")
    loss = -(w * picked).sum() / total

    def rule(g):
        onehot = np.zeros(ls.shape)
        np.put_along_axis(onehot, labels[..., None], 1.0, axis=-1)
        return ((np.exp(ls.data) - onehot) * (w / total)[..., None] * g,)

    return Tensor._make(np.asarray(loss), (logits,), rule, "cross_entropy")


def mse_loss(pred: ArrayLike, target: ArrayLike) -> Tensor:
    d = sub(pred, as_tensor(target).detach())
    return mean(d * d)


def parameters_finite(params: dict[str, Tensor]) -> Iterable[str]:
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            yield name
