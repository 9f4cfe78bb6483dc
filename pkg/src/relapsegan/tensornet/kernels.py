"""im2col / col2im gather-scatter kernels behind every (transposed) convolution.

Activations are channels-last (NHWC) here. Column layout::

    cols[(n*Ho + i)*Wo + j, (di*k + dj)*C + c] = xpad[n, i*s + di, j*s + dj, c]

Both a numba and a pure-numpy implementation are provided; ``im2col`` and
``col2im`` are bound to one of them according to ``RELAPSEGAN_NUMBA``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._accel import USE_NUMBA, njit


def out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def im2col_numpy(x, k, stride, pad):
    n, h, w, c = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ho, wo = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, : stride * ho : stride, : stride * wo : stride]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, k * k * c)


def col2im_numpy(cols, shape, k, stride, pad):
    n, h, w, c = shape
    ho, wo = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    c6 = cols.reshape(n, ho, wo, k, k, c)
    out = np.zeros((n, h + 2 * pad, w + 2 * pad, c))
    for di in range(k):
        for dj in range(k):
            out[:, di : di + stride * ho : stride, dj : dj + stride * wo : stride, :] += c6[:, :, :, di, dj, :]
    return out[:, pad : pad + h, pad : pad + w, :]


@njit
def _im2col_nb(x, k, stride, pad, ho, wo):
    n, h, w, c = x.shape
    cols = np.zeros((n * ho * wo, k * k * c))
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                for di in range(k):
                    y = i * stride + di - pad
                    if y < 0 or y >= h:
                        continue
                    for dj in range(k):
                        xx = j * stride + dj - pad
                        if xx < 0 or xx >= w:
                            continue
                        base = (di * k + dj) * c
                        for ch in range(c):
                            cols[r, base + ch] = x[b, y, xx, ch]
    return cols


@njit
def _col2im_nb(cols, n, h, w, c, k, stride, pad, ho, wo):
    out = np.zeros((n, h, w, c))
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                r = (b * ho + i) * wo + j
                for di in range(k):
                    y = i * stride + di - pad
                    if y < 0 or y >= h:
                        continue
                    for dj in range(k):
                        xx = j * stride + dj - pad
                        if xx < 0 or xx >= w:
                            continue
                        base = (di * k + dj) * c
                        for ch in range(c):
                            out[b, y, xx, ch] += cols[r, base + ch]
    return out


def im2col_numba(x, k, stride, pad):
    ho, wo = out_size(x.shape[1], k, stride, pad), out_size(x.shape[2], k, stride, pad)
    return _im2col_nb(np.ascontiguousarray(x, dtype=np.float64), k, stride, pad, ho, wo)


def col2im_numba(cols, shape, k, stride, pad):
    n, h, w, c = shape
    ho, wo = out_size(h, k, stride, pad), out_size(w, k, stride, pad)
    return _col2im_nb(np.ascontiguousarray(cols, dtype=np.float64), n, h, w, c, k, stride, pad, ho, wo)


if USE_NUMBA:
    im2col, col2im = im2col_numba, col2im_numba
    BACKEND = "numba"
else:
    im2col, col2im = im2col_numpy, col2im_numpy
    BACKEND = "numpy"
