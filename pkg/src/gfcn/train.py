"""Minibatch training and evaluation of ``GFCN`` models with cross-entropy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import tensor as T
from .model import GFCN
from .optim import make_optimizer


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"
    weight_decay: float = 0.0
    momentum: float = 0.0
    lr_decay: float = 1.0  # multiplied into the learning rate after every epoch
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    """Labelled signals.

    Inductive: ``signals[N, V, C]`` with one label per signal (a class, or a
    vertex id for per-vertex heads).  Transductive: a single signal
    ``[1, V, C]`` with ``labels[V]`` and a boolean ``mask[V]`` of the
    vertices used for the loss.
    """

    signals: np.ndarray
    labels: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.signals, dtype=np.float64)
        if X.ndim == 2:
            X = X[:, :, None]
        self.signals = X
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if X.shape[0] != 1 or self.labels.shape != self.mask.shape:
                raise ValueError("transductive data needs one signal and labels/mask per vertex")
        elif X.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{X.shape[0]} signals but {self.labels.shape[0]} labels")

    @property
    def transductive(self) -> bool:
        return self.mask is not None

    def __len__(self) -> int:
        return int(self.mask.sum()) if self.transductive else self.signals.shape[0]


def _logits(out: T.Tensor) -> T.Tensor:
    # per-vertex scalar heads score vertices: [B, V, 1] -> [B, V]
    if out.ndim == 3 and out.shape[-1] == 1:
        return T.reshape(out, out.shape[:2])
    return out


def _batch_loss(model: GFCN, data: Dataset, idx: np.ndarray):
    out = _logits(model(data.signals[idx]))
    if data.transductive:
        logits = T.reshape(out, out.shape[1:])
        w = data.mask.astype(np.float64)
        loss = T.cross_entropy(logits, data.labels, w)
        correct = float(((logits.data.argmax(-1) == data.labels) & data.mask).sum())
        return loss, correct, float(w.sum())
    y = data.labels[idx]
    if out.ndim != 2:
        raise ValueError(f"model output {out.shape} cannot be scored against one label per signal")
    loss = T.cross_entropy(out, y)
    return loss, float((out.data.argmax(-1) == y).sum()), float(len(idx))


def train(
    model: GFCN,
    data: Dataset,
    cfg: TrainConfig,
    log: Optional[Callable[[dict], None]] = None,
) -> list[dict]:
    """Fit ``model.params`` in place; returns one ``{epoch, loss, metric}`` record per epoch.

    ``metric`` is the training accuracy accumulated over the epoch's batches.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(
        cfg.optimizer, model.params, cfg.lr, weight_decay=cfg.weight_decay, momentum=cfg.momentum
    )
    history = []
    n = data.signals.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        tot_loss = tot_correct = tot_count = 0.0
        for a in range(0, n, cfg.batch_size):
            idx = order[a : a + cfg.batch_size]
            loss, correct, count = _batch_loss(model, data, idx)
            opt.zero_grad()
            loss.backward()
            opt.step()
            tot_loss += loss.item() * count
            tot_correct += correct
            tot_count += count
        rec = {"epoch": epoch, "loss": tot_loss / tot_count, "metric": tot_correct / tot_count}
        history.append(rec)
        if log is not None:
            log(rec)
        opt.lr *= cfg.lr_decay
    return history


def predict(model: GFCN, signals: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Model outputs (logits or per-vertex scores) without building a tape."""
    X = np.asarray(signals, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    outs = []
    with T.no_grad():
        for a in range(0, X.shape[0], batch_size):
            outs.append(_logits(model(X[a : a + batch_size])).data)
    return np.concatenate(outs) if outs else np.zeros((0,))


def accuracy(model: GFCN, data: Dataset, batch_size: int = 256) -> float:
    out = predict(model, data.signals, batch_size)
    if data.transductive:
        pred = out[0].argmax(-1)
        return float((pred == data.labels)[data.mask].mean())
    return float((out.argmax(-1) == data.labels).mean())


def format_history(history: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in history)
