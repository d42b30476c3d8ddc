"""IDX (MNIST) file reading and the lattice flow model for 28x28 digits."""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

from .decompose import lattice_flows
from .model import Activation, Conv, Dense, Flatten, ModelSpec, Pool

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
DEFAULT_DIR_ENV = "GFCN_MNIST_DIR"
FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IDXError(ValueError):
    pass


def _read_bytes(path: str) -> bytes:
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path: str, magic: int) -> np.ndarray:
    """Unsigned-byte IDX array with the given magic number."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IDXError(f"{path}: truncated header")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise IDXError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise IDXError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    need = int(np.prod(dims))
    if len(raw) - head < need:
        raise IDXError(f"{path}: expected {need} data bytes, found {len(raw) - head}")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=head).reshape(dims)


def load_idx(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Images as ``[N, 784]`` floats in [0, 1] (row-major pixels) and labels ``[N]``."""
    imgs = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if imgs.shape[0] != labels.shape[0]:
        raise IDXError(f"{imgs.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise IDXError(f"label {int(labels.max())} outside 0..9")
    X = imgs.reshape(imgs.shape[0], -1).astype(np.float64) / 255.0
    return X, labels.astype(np.int64)


def default_dir() -> str:
    return os.environ.get(DEFAULT_DIR_ENV, "/root/mnist")


def find_split(split: str, directory: str | None = None) -> tuple[str, str]:
    d = directory or default_dir()
    out = []
    for name in FILES[split]:
        for cand in (name, name + ".gz"):
            p = os.path.join(d, cand)
            if os.path.exists(p):
                out.append(p)
                break
        else:
            raise FileNotFoundError(os.path.join(d, name))
    return out[0], out[1]


def load_split(split: str, directory: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    return load_idx(*find_split(split, directory))


def subset(X: np.ndarray, y: np.ndarray, size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.sort(np.random.default_rng(seed).choice(X.shape[0], size=size, replace=False))
    return X[idx], y[idx]


def lattice_model_spec(channels: int = 16, hidden: int = 128, share_across_flows: bool = False) -> ModelSpec:
    """Two conv(3, stride 1) + pool(3, stride 2) stages followed by two dense layers."""
    return ModelSpec(
        [
            Conv(channels, n=3, share_across_flows=share_across_flows),
            Activation("relu"),
            Pool(3, 2, "max"),
            Conv(channels, n=3, share_across_flows=share_across_flows),
            Activation("relu"),
            Pool(3, 2, "max"),
            Flatten(),
            Dense(hidden),
            Activation("relu"),
            Dense(10),
        ]
    )


def lattice_cover(diagonals: bool = True):
    """Graph and cover of the 28x28 pixel lattice (row-major vertex ids)."""
    return lattice_flows(28, 28, diagonals)
