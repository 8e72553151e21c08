"""Forward/backward kernels for the 1-D CNN layers.

Batched activations are (batch, channels, length) arrays; dense layers work on
(batch, features). All kernels are dtype-generic: float32 in training, float64
in the high-precision gradient-check path. Convolutions are lowered to matrix
multiplies over sliding windows.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x, kernel, bias, stride=1):
    """Valid cross-correlation. x: (B,C,L), kernel: (F,C,K), bias: (F,) -> (B,F,L_out)."""
    f, c, k = kernel.shape
    win = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]  # (B,C,L_out,K)
    b, _, l_out, _ = win.shape
    xmat = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(b * l_out, c * k)
    out = xmat @ kernel.reshape(f, c * k).T + bias
    out = np.ascontiguousarray(out.reshape(b, l_out, f).transpose(0, 2, 1))
    cache = (x.shape, xmat, kernel, stride)
    return out, cache


def conv1d_backward(dout, cache):
    """dout: (B,F,L_out) -> (dx, dkernel, dbias)."""
    x_shape, xmat, kernel, stride = cache
    f, c, k = kernel.shape
    b, _, l_out = dout.shape
    dmat = np.ascontiguousarray(dout.transpose(0, 2, 1)).reshape(b * l_out, f)
    dkernel = (dmat.T @ xmat).reshape(f, c, k)
    dbias = dmat.sum(axis=0)
    dwin = (dmat @ kernel.reshape(f, c * k)).reshape(b, l_out, c, k).transpose(0, 2, 1, 3)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for j in range(k):  # overlap-add the window gradients back onto the input
        dx[:, :, j : j + stride * (l_out - 1) + 1 : stride] += dwin[:, :, :, j]
    return dx, dkernel, dbias


def maxpool1d_forward(x, pool):
    """Non-overlapping max pool of width `pool`; a trailing remainder is dropped.

    Ties within a window resolve to the earliest position (argmax convention),
    which keeps the backward pass deterministic.
    """
    b, c, l = x.shape
    l_out = (l - pool) // pool + 1
    trimmed = x[:, :, : l_out * pool].reshape(b, c, l_out, pool)
    idx = trimmed.argmax(axis=3)
    out = np.take_along_axis(trimmed, idx[..., None], axis=3)[..., 0]
    cache = (x.shape, idx, pool)
    return out, cache


def maxpool1d_backward(dout, cache):
    x_shape, idx, pool = cache
    b, c, l = x_shape
    l_out = idx.shape[2]
    dtrimmed = np.zeros((b, c, l_out, pool), dtype=dout.dtype)
    np.put_along_axis(dtrimmed, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, : l_out * pool] = dtrimmed.reshape(b, c, l_out * pool)
    return dx


def relu_forward(x):
    out = np.maximum(x, 0)
    return out, x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def dense_forward(x, w, bias):
    """x: (B, ...) flattened row-major to (B, in_features); w: (in_features, units)."""
    b = x.shape[0]
    xflat = np.ascontiguousarray(x).reshape(b, -1)
    out = xflat @ w + bias
    return out, (x.shape, xflat, w)


def dense_backward(dout, cache):
    x_shape, xflat, w = cache
    dw = xflat.T @ dout
    dbias = dout.sum(axis=0)
    dx = (dout @ w.T).reshape(x_shape)
    return dx, dw, dbias


def softmax_forward(z):
    """Row-wise stable softmax. z: (B, c) logits -> probabilities."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
