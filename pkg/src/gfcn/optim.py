"""SGD and Adam updates, plus JSON checkpoints of named parameters."""

from __future__ import annotations

import json
from typing import Mapping, Optional

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.param = name


def _check(params: Mapping[str, Tensor]) -> None:
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(name)


def sgd_step(params: Mapping[str, Tensor], lr: float) -> None:
    _check(params)
    for p in params.values():
        if p.grad is not None:
            p.data = p.data - lr * p.grad


class Adam:
    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = dict(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        _check(self.params)
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            v = self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params: Mapping[str, Tensor], lr: float = 0.01, momentum: float = 0.0):
        self.params = dict(params)
        self.lr = lr
        self.momentum = momentum
        self.buf = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        _check(self.params)
        for k, p in self.params.items():
            if p.grad is None:
                continue
            if self.momentum:
                self.buf[k] = self.momentum * self.buf[k] + p.grad
                p.data = p.data - self.lr * self.buf[k]
            else:
                p.data = p.data - self.lr * p.grad


def adam_step(
    params: Mapping[str, Tensor],
    state: Optional[Adam] = None,
    lr: float = 1e-3,
) -> Adam:
    """One Adam update; pass the returned state back in for the next step."""
    if state is None:
        state = Adam(params, lr=lr)
    state.step()
    return state


def make_optimizer(name: str, params: Mapping[str, Tensor], lr: float, **kw):
    if name == "adam":
        return Adam(params, lr=lr, weight_decay=kw.get("weight_decay", 0.0))
    if name == "sgd":
        return SGD(params, lr=lr, momentum=kw.get("momentum", 0.0))
    raise ValueError(f"unknown optimizer {name!r}")


# -- checkpoints --------------------------------------------------------------

def params_to_dict(params: Mapping[str, Tensor]) -> dict:
    # float repr is the shortest string that round-trips exactly
    return {
        k: {"shape": list(p.shape), "data": [float(x) for x in p.data.ravel()]}
        for k, p in sorted(params.items())
    }


def params_from_dict(d: Mapping) -> dict[str, Tensor]:
    out = {}
    for k, rec in d.items():
        arr = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
        out[k] = Tensor(arr, requires_grad=True, name=k)
    return out


def save_checkpoint(params: Mapping[str, Tensor], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(params), fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str) -> dict[str, Tensor]:
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
