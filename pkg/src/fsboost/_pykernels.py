"""Pure numpy convolution kernels (fallback when the compiled module is unavailable).

All arrays are float64 C-contiguous; callers in :mod:`fsboost.tensor` do the
validation and casting.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "python"


def _im2col(x, k, pad):
    c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    # windows: (c, h, w, k, k) -> (c, k, k, h, w)
    win = sliding_window_view(x, (k, k), axis=(1, 2))
    return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * k * k, h * w)


def conv2d(x, weight, bias, pad):
    c_out, c_in, k, _ = weight.shape
    _, h, w = x.shape
    cols = _im2col(x, k, pad)
    out = weight.reshape(c_out, -1) @ cols
    out += bias[:, None]
    return out.reshape(c_out, h, w)


def conv2d_backward(x, weight, grad_out, pad, need_input=True):
    c_out, c_in, k, _ = weight.shape
    _, h, w = x.shape
    g = grad_out.reshape(c_out, h * w)
    cols = _im2col(x, k, pad)
    grad_w = (g @ cols.T).reshape(weight.shape)
    grad_b = g.sum(axis=1)
    if not need_input:
        return None, grad_w, grad_b
    dcols = (weight.reshape(c_out, -1).T @ g).reshape(c_in, k, k, h, w)
    dxp = np.zeros((c_in, h + 2 * pad, w + 2 * pad))
    for dy in range(k):
        for dx in range(k):
            dxp[:, dy:dy + h, dx:dx + w] += dcols[:, dy, dx]
    grad_x = dxp[:, pad:pad + h, pad:pad + w] if pad else dxp
    return np.ascontiguousarray(grad_x), grad_w, grad_b
