"""Naive loop implementations used as oracles for the optimized kernels.

Everything here is written with explicit Python loops and float64
accumulation. Slow by design; keep inputs small.
"""
from __future__ import annotations

import math

import numpy as np


def conv2d_naive(x, weight, bias, stride=1, padding=0, dilation=1, groups=1):
    n, c_in, h, w = x.shape
    c_out, cpg, kh, kw = weight.shape
    opg = c_out // groups
    oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    xl = x.tolist()
    wl = weight.tolist()
    bias = np.zeros(c_out) if bias is None else np.asarray(bias)
    out = np.zeros((n, c_out, oh, ow), dtype=np.float64)
    for b in range(n):
        for co in range(c_out):
            g = co // opg
            for i in range(oh):
                for j in range(ow):
                    acc = float(bias[co])
                    for ci in range(cpg):
                        xc = xl[b][g * cpg + ci]
                        wc = wl[co][ci]
                        for ki in range(kh):
                            ih = i * stride - padding + ki * dilation
                            if ih < 0 or ih >= h:
                                continue
                            row = xc[ih]
                            for kj in range(kw):
                                iw = j * stride - padding + kj * dilation
                                if 0 <= iw < w:
                                    acc += wc[ki][kj] * row[iw]
                    out[b, co, i, j] = acc
    return out


def batchnorm_naive(x, gamma, beta, mean, var, eps):
    out = np.empty(x.shape, dtype=np.float64)
    for ch in range(x.shape[1]):
        s = gamma[ch] / math.sqrt(var[ch] + eps)
        out[:, ch] = (x[:, ch].astype(np.float64) - mean[ch]) * s + beta[ch]
    return out


def maxpool2_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2), dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[b, ch, i, j] = max(
                        x[b, ch, 2 * i, 2 * j], x[b, ch, 2 * i, 2 * j + 1],
                        x[b, ch, 2 * i + 1, 2 * j], x[b, ch, 2 * i + 1, 2 * j + 1],
                    )
    return out


def bilinear_naive(x, out_h, out_w):
    n, c, h, w = x.shape
    out = np.zeros((n, c, out_h, out_w), dtype=np.float64)

    def src(d, size_in, size_out):
        s = (d + 0.5) * size_in / size_out - 0.5
        return min(max(s, 0.0), size_in - 1.0)

    for b in range(n):
        for ch in range(c):
            for i in range(out_h):
                sy = src(i, h, out_h)
                y0 = int(math.floor(sy))
                y1 = min(y0 + 1, h - 1)
                fy = sy - y0
                for j in range(out_w):
                    sx = src(j, w, out_w)
                    x0 = int(math.floor(sx))
                    x1 = min(x0 + 1, w - 1)
                    fx = sx - x0
                    v00 = float(x[b, ch, y0, x0])
                    v01 = float(x[b, ch, y0, x1])
                    v10 = float(x[b, ch, y1, x0])
                    v11 = float(x[b, ch, y1, x1])
                    out[b, ch, i, j] = (
                        v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx
                        + v10 * fy * (1 - fx) + v11 * fy * fx
                    )
    return out


def gap_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, 1, 1), dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            s = 0.0
            for i in range(h):
                for j in range(w):
                    s += float(x[b, ch, i, j])
            out[b, ch, 0, 0] = s / (h * w)
    return out


def adaptive_avg_pool_naive(x, bins):
    n, c, h, w = x.shape
    out = np.zeros((n, c, bins, bins), dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            for i in range(bins):
                r0 = math.floor(i * h / bins)
                r1 = math.ceil((i + 1) * h / bins)
                for j in range(bins):
                    c0 = math.floor(j * w / bins)
                    c1 = math.ceil((j + 1) * w / bins)
                    s = 0.0
                    for y in range(r0, r1):
                        for z in range(c0, c1):
                            s += float(x[b, ch, y, z])
                    out[b, ch, i, j] = s / ((r1 - r0) * (c1 - c0))
    return out


def relative_error(actual, expected) -> float:
    """Max absolute deviation scaled by the reference's max magnitude."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(float(np.max(np.abs(expected))) if expected.size else 0.0, 1e-12)
    return float(np.max(np.abs(actual - expected))) / scale if expected.size else 0.0
