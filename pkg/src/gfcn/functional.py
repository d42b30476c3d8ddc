"""1D convolution, pooling and dense layers built from tensor primitives.

Convolution and pooling are expressed as a gather of window taps followed by
a reduction, so the same code serves one signal or many packed paths.  Index
arrays use ``-1`` for taps that fall into the zero (or -inf) padding.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor


def conv_out_length(length: int, n: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - n) // stride + 1


def conv_index(
    length: int, n: int, stride: int = 1, padding: int = 0, closed: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices ``[out_length, n]`` and window centres for a 1D convolution.

    Output ``k`` reads inputs ``k*stride - padding + j`` for ``j < n`` and is
    centred at ``k*stride + n//2 - padding`` (clipped into the signal).  A
    closed loop wraps around instead of padding.
    """
    if n < 1 or stride < 1 or padding < 0:
        raise ValueError("filter size and stride must be positive, padding non-negative")
    half = n // 2
    if closed:
        out = -(-length // stride)
        centers = np.arange(out) * stride
        idx = (centers[:, None] + np.arange(n)[None, :] - half) % length
        return idx.astype(np.intp), centers.astype(np.intp)
    out = conv_out_length(length, n, stride, padding)
    if out < 1:
        raise ValueError(
            f"convolution of a length-{length} signal with n={n}, padding={padding} has no output"
        )
    start = np.arange(out) * stride - padding
    idx = start[:, None] + np.arange(n)[None, :]
    idx = np.where((idx >= 0) & (idx < length), idx, -1)
    centers = np.clip(start + half, 0, length - 1)
    return idx.astype(np.intp), centers.astype(np.intp)


def pool_index(length: int, n: int, stride: int = 1, closed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Windows of ``n`` taps centred at ``0, stride, 2*stride, ...``."""
    if n < 1 or stride < 1:
        raise ValueError("pool size and stride must be at least 1")
    half = n // 2
    centers = np.arange(-(-length // stride)) * stride
    idx = centers[:, None] + np.arange(n)[None, :] - half
    if closed:
        idx = idx % length
    else:
        idx = np.where((idx >= 0) & (idx < length), idx, -1)
    return idx.astype(np.intp), centers.astype(np.intp)


def gather_conv(
    x: Tensor,
    idx: np.ndarray,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    taps=None,
) -> Tensor:
    """Apply a filter ``weight[n, c_in, c_out]`` at the windows given by ``idx``.

    ``x`` is ``[..., length, c_in]``; ``taps`` optionally scales each tap,
    shaped ``[out, n]`` or ``[..., out, n]`` (edge weights, attention).
    """
    n, cin, cout = weight.shape
    if x.shape[-1] != cin:
        raise ValueError(f"signal has {x.shape[-1]} channels, filter expects {cin}")
    g = T.take(x, idx, axis=-2, fill=0.0)  # [..., out, n, cin]
    if taps is not None:
        tp = taps if isinstance(taps, Tensor) else Tensor(np.asarray(taps, dtype=np.float64))
        g = g * T.reshape(tp, tp.shape + (1,))
    flat = T.reshape(g, g.shape[:-2] + (n * cin,))
    out = flat @ T.reshape(weight, (n * cin, cout))
    if bias is not None:
        out = out + bias
    return out


def conv1d(
    signal: Tensor,
    filt: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    taps=None,
) -> Tensor:
    """1D convolution of ``signal[..., length, c_in]`` with ``filt[n, c_in, c_out]``.

    The output has ``(length + 2*padding - n) // stride + 1`` positions.
    """
    signal = T.as_tensor(signal)
    filt = T.as_tensor(filt)
    if filt.ndim != 3:
        raise ValueError("filter must be shaped [n, c_in, c_out]")
    idx, _ = conv_index(signal.shape[-2], filt.shape[0], stride, padding)
    return gather_conv(signal, idx, filt, None if bias is None else T.as_tensor(bias), taps)


def gather_pool(x: Tensor, idx: np.ndarray, mode: str = "max") -> Tensor:
    if mode == "max":
        g = T.take(x, idx, axis=-2, fill=-np.inf)
        return T.tmax(g, axis=-2)
    if mode == "avg":
        g = T.take(x, idx, axis=-2, fill=0.0)
        counts = (idx >= 0).sum(axis=1).astype(np.float64)[:, None]
        return T.tsum(g, axis=-2) * (1.0 / counts)
    raise ValueError(f"unknown pooling mode {mode!r}")


def pool1d(signal: Tensor, n: int, stride: int = 1, mode: str = "max") -> Tensor:
    """Pooling with windows centred at multiples of ``stride``.

    Positions outside the signal are ignored: -inf for max, excluded from the
    mean for avg.
    """
    signal = T.as_tensor(signal)
    idx, _ = pool_index(signal.shape[-2], n, stride)
    return gather_pool(signal, idx, mode)


def dense(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    x, w = T.as_tensor(x), T.as_tensor(w)
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"dense input has {x.shape[-1]} features, weight expects {w.shape[0]}")
    out = x @ w
    return out if b is None else out + T.as_tensor(b)
