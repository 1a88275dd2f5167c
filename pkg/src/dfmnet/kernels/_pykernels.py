"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation, including the
accumulation order of the depthwise convolution and the float64 blend of the
bilinear resize, so both backends agree bit-for-bit on those kernels.
"""
from __future__ import annotations

import numpy as np

NAME = "python"


def set_num_threads(n: int) -> None:
    # numpy kernels run on one thread; BLAS threads are handled by the caller
    pass


def _out_extent(size: int, k: int, stride: int, pad: int, dil: int) -> int:
    return (size + 2 * pad - dil * (k - 1) - 1) // stride + 1


def depthwise_conv(x: np.ndarray, w: np.ndarray, stride: int, pad: int, dil: int) -> np.ndarray:
    """Depthwise cross-correlation. ``x`` is (n, c, h, w), ``w`` is (c, kh, kw)."""
    n, c, h, wd = x.shape
    _, kh, kw = w.shape
    oh = _out_extent(h, kh, stride, pad, dil)
    ow = _out_extent(wd, kw, stride, pad, dil)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    out = np.zeros((n, c, oh, ow), dtype=np.float32)
    for ki in range(kh):
        r0 = ki * dil
        for kj in range(kw):
            c0 = kj * dil
            window = xp[:, :, r0:r0 + stride * (oh - 1) + 1:stride, c0:c0 + stride * (ow - 1) + 1:stride]
            out += w[:, ki, kj][None, :, None, None] * window
    return out


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int, dil: int) -> np.ndarray:
    """Unfold (n, c, h, w) into (n, c*kh*kw, oh*ow) with zero padding."""
    n, c, h, wd = x.shape
    oh = _out_extent(h, kh, stride, pad, dil)
    ow = _out_extent(wd, kw, stride, pad, dil)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=np.float32)
    for ki in range(kh):
        r0 = ki * dil
        for kj in range(kw):
            c0 = kj * dil
            cols[:, :, ki, kj] = xp[:, :, r0:r0 + stride * (oh - 1) + 1:stride, c0:c0 + stride * (ow - 1) + 1:stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def maxpool2(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    v = x[:, :, :2 * oh, :2 * ow]
    return np.maximum(np.maximum(v[:, :, 0::2, 0::2], v[:, :, 0::2, 1::2]),
                      np.maximum(v[:, :, 1::2, 0::2], v[:, :, 1::2, 1::2]))


def _axis_coords(in_size: int, out_size: int):
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, in_size - 1)
    t = src - i0
    return i0, i1, t


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    n, c, h, w = x.shape
    y0, y1, ty = _axis_coords(h, out_h)
    x0, x1, tx = _axis_coords(w, out_w)
    xd = x.astype(np.float64)
    ty = ty[:, None]
    tx = tx[None, :]
    top = (1.0 - tx) * xd[:, :, y0[:, None], x0[None, :]] + tx * xd[:, :, y0[:, None], x1[None, :]]
    bot = (1.0 - tx) * xd[:, :, y1[:, None], x0[None, :]] + tx * xd[:, :, y1[:, None], x1[None, :]]
    return ((1.0 - ty) * top + ty * bot).astype(np.float32)
