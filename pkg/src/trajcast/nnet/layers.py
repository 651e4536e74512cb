"""Forward/backward primitives on plain numpy arrays.

Every op returns its output plus an opaque cache consumed by the matching
backward function; gradients are exact reverse-mode derivatives. Batched
convolution goes through im2col so the heavy lifting is a single GEMM.
"""

from __future__ import annotations

import numpy as np


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    pad = kernel // 2
    return (size + 2 * pad - kernel) // stride + 1


def _im2col(xp: np.ndarray, kernel: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c, _, _ = xp.shape
    cols = np.empty((n, c, kernel, kernel, out_h, out_w), dtype=xp.dtype)
    for ki in range(kernel):
        for kj in range(kernel):
            cols[:, :, ki, kj] = xp[:, :, ki : ki + stride * out_h : stride,
                                    kj : kj + stride * out_w : stride]
    return cols.reshape(n, c * kernel * kernel, out_h * out_w)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    """x: (N, C, H, W); w: (F, C, k, k); same-padding convolution."""
    n, c, h, wd = x.shape
    f, _, kernel, _ = w.shape
    pad = kernel // 2
    out_h = conv_output_size(h, kernel, stride)
    out_w = conv_output_size(wd, kernel, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, kernel, stride, out_h, out_w)
    w_mat = w.reshape(f, -1)
    y = np.matmul(w_mat, cols) + b[:, None]
    y = y.reshape(n, f, out_h, out_w)
    cache = (cols, w, x.shape, stride, out_h, out_w)
    return y, cache


def conv2d_backward(dy: np.ndarray, cache):
    cols, w, x_shape, stride, out_h, out_w = cache
    n, c, h, wd = x_shape
    f, _, kernel, _ = w.shape
    pad = kernel // 2
    dy_mat = dy.reshape(n, f, out_h * out_w)
    db = dy_mat.sum(axis=(0, 2))
    dw = np.einsum("nfp,ncp->fc", dy_mat, cols).reshape(w.shape)
    dcols = np.matmul(w.reshape(f, -1).T, dy_mat)
    dcols = dcols.reshape(n, c, kernel, kernel, out_h, out_w)
    dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=dy.dtype)
    for ki in range(kernel):
        for kj in range(kernel):
            dxp[:, :, ki : ki + stride * out_h : stride,
                kj : kj + stride * out_w : stride] += dcols[:, :, ki, kj]
    dx = dxp[:, :, pad : pad + h, pad : pad + wd]
    return dx, dw, db


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, (x, w)


def dense_backward(dy: np.ndarray, cache):
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def relu_forward(x: np.ndarray):
    y = np.maximum(x, 0)
    return y, (x > 0)


def relu_backward(dy: np.ndarray, mask: np.ndarray):
    return dy * mask


def dropout_mask(rng: np.random.Generator, shape, rate: float, dtype) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability `rate`, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    keep = (rng.random(shape) >= rate).astype(dtype)
    return keep / np.asarray(1.0 - rate, dtype=dtype)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_cell_forward(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                      wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """Single LSTM step. Gate order in the packed weights: i, f, g, o."""
    r = h_prev.shape[1]
    pre = x @ wx + h_prev @ wh + b
    i = _sigmoid(pre[:, :r])
    f = _sigmoid(pre[:, r : 2 * r])
    g = np.tanh(pre[:, 2 * r : 3 * r])
    o = _sigmoid(pre[:, 3 * r :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (x, h_prev, c_prev, i, f, g, o, c, tanh_c, wx, wh)
    return h, c, cache


def lstm_cell_backward(dh: np.ndarray, dc: np.ndarray, cache):
    """Backward through one LSTM step.

    dh/dc are gradients w.r.t. this step's hidden and cell outputs (dc
    already accumulates the contribution flowing back from step t+1).
    Returns (dx, dh_prev, dc_prev, dwx, dwh, db).
    """
    x, h_prev, c_prev, i, f, g, o, c, tanh_c, wx, wh = cache
    do = dh * tanh_c
    dc_total = dc + dh * o * (1.0 - tanh_c**2)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f
    dpre = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g**2), do * o * (1.0 - o)],
        axis=1,
    )
    dx = dpre @ wx.T
    dh_prev = dpre @ wh.T
    dwx = x.T @ dpre
    dwh = h_prev.T @ dpre
    db = dpre.sum(axis=0)
    return dx, dh_prev, dc_prev, dwx, dwh, db
