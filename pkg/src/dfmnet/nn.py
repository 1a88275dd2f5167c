"""Convolution, normalization folding, activations, pooling and resizing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .tensor import DTYPE, ShapeError, Tensor

BN_EPS = 1e-5

# open-interval bounds for sigmoid outputs in float32
_SIG_LO = np.float32(np.finfo(np.float32).tiny)
_SIG_HI = np.float32(1.0) - np.float32(2.0**-24)


@dataclass(frozen=True)
class ConvParams:
    weight: np.ndarray  # (c_out, c_in // groups, k_h, k_w)
    bias: np.ndarray    # (c_out,)
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    groups: int = 1

    def __post_init__(self):
        w = self.weight
        if w.ndim != 4:
            raise ShapeError(f"conv weight must be rank 4, got {w.shape}")
        if self.bias.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match c_out={w.shape[0]}")
        if self.stride < 1 or self.dilation < 1 or self.groups < 1 or self.padding < 0:
            raise ValueError("stride, dilation, groups must be positive and padding non-negative")
        if w.shape[0] % self.groups:
            raise ShapeError(f"groups={self.groups} does not divide c_out={w.shape[0]}")

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1] * self.groups

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def create(cls, weight, bias=None, stride=1, padding=0, dilation=1, groups=1) -> "ConvParams":
        weight = np.ascontiguousarray(weight, dtype=DTYPE)
        if bias is None:
            bias = np.zeros(weight.shape[0], dtype=DTYPE)
        return cls(weight, np.ascontiguousarray(bias, dtype=DTYPE), stride, padding, dilation, groups)


@dataclass(frozen=True)
class BnParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = BN_EPS

    def __post_init__(self):
        n = self.gamma.shape
        if not (self.beta.shape == self.running_mean.shape == self.running_var.shape == n):
            raise ShapeError("batch-norm vectors must share one length")
        if (self.running_var < 0).any():
            raise ValueError("running_var entries must be non-negative")

    @classmethod
    def identity(cls, channels: int, epsilon: float = BN_EPS) -> "BnParams":
        one = np.ones(channels, dtype=DTYPE)
        zero = np.zeros(channels, dtype=DTYPE)
        return cls(one, zero, zero.copy(), one.copy(), epsilon)


def output_extent(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """2-D cross-correlation with zero padding."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects (n, c, h, w), got {x.shape}")
    n, c, h, w = x.shape
    if c != p.in_channels:
        raise ShapeError(f"conv2d expects {p.in_channels} input channels, got {c}")
    c_out, cpg, kh, kw = p.weight.shape
    oh = output_extent(h, kh, p.stride, p.padding, p.dilation)
    ow = output_extent(w, kw, p.stride, p.padding, p.dilation)
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel window exceeds padded input {h}x{w}")
    x = np.ascontiguousarray(x, dtype=DTYPE)
    k = kernels.backend()

    if p.groups == 1:
        if kh == 1 and kw == 1 and p.stride == 1 and p.padding == 0:
            cols = x.reshape(n, c, h * w)
        else:
            cols = k.im2col(x, kh, kw, p.stride, p.padding, p.dilation)
        out = np.matmul(p.weight.reshape(c_out, -1), cols)
    elif p.groups == c == c_out:
        out = k.depthwise_conv(x, p.weight.reshape(c, kh, kw), p.stride, p.padding, p.dilation)
    else:
        g = p.groups
        opg = c_out // g
        out = np.empty((n, c_out, oh * ow), dtype=DTYPE)
        for gi in range(g):
            xs = np.ascontiguousarray(x[:, gi * cpg:(gi + 1) * cpg])
            cols = k.im2col(xs, kh, kw, p.stride, p.padding, p.dilation)
            wg = p.weight[gi * opg:(gi + 1) * opg].reshape(opg, -1)
            out[:, gi * opg:(gi + 1) * opg] = np.matmul(wg, cols)
    out = out.reshape(n, c_out, oh, ow)
    out += p.bias[None, :, None, None]
    return out


def batchnorm_fold(p: ConvParams, bn: BnParams) -> ConvParams:
    """Fold inference-mode batch norm into the preceding convolution."""
    if bn.gamma.shape != (p.out_channels,):
        raise ShapeError(f"batch-norm length {bn.gamma.shape[0]} != c_out {p.out_channels}")
    scale = bn.gamma.astype(np.float64) / np.sqrt(bn.running_var.astype(np.float64) + bn.epsilon)
    weight = (p.weight.astype(np.float64) * scale[:, None, None, None]).astype(DTYPE)
    bias = ((p.bias.astype(np.float64) - bn.running_mean) * scale + bn.beta).astype(DTYPE)
    return ConvParams(weight, bias, p.stride, p.padding, p.dilation, p.groups)


def batchnorm(x: Tensor, bn: BnParams) -> Tensor:
    """Unfolded inference batch norm; kept for checking the folded path."""
    scale = bn.gamma / np.sqrt(bn.running_var.astype(np.float64) + bn.epsilon)
    shift = bn.beta - bn.running_mean * scale
    return (x * scale[None, :, None, None] + shift[None, :, None, None]).astype(DTYPE)


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, DTYPE(0.0))


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function; results are clamped into the open interval (0, 1)."""
    xd = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(xd))
    y = np.where(xd >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(DTYPE)
    return np.clip(y, _SIG_LO, _SIG_HI)


def clamp_open_unit(x: Tensor) -> Tensor:
    return np.clip(x, _SIG_LO, _SIG_HI)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; an odd trailing row/column is dropped."""
    if x.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
        raise ShapeError(f"maxpool2 needs spatial extent >= 2, got {x.shape}")
    return kernels.backend().maxpool2(np.ascontiguousarray(x, dtype=DTYPE))


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Half-pixel-centre bilinear resize with edge clamping."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear_resize output extent must be >= 1, got {out_h}x{out_w}")
    if x.ndim != 4:
        raise ShapeError(f"bilinear_resize expects (n, c, h, w), got {x.shape}")
    return kernels.backend().resize_bilinear(np.ascontiguousarray(x, dtype=DTYPE), int(out_h), int(out_w))


def upsample(x: Tensor, factor: int) -> Tensor:
    return bilinear_resize(x, x.shape[2] * factor, x.shape[3] * factor)


def adaptive_avg_pool(x: Tensor, bins: int) -> Tensor:
    """Average pool to ``bins x bins`` cells with floor/ceil cell boundaries."""
    n, c, h, w = x.shape
    out = np.empty((n, c, bins, bins), dtype=DTYPE)
    for i in range(bins):
        r0, r1 = (i * h) // bins, -((-(i + 1) * h) // bins)
        for j in range(bins):
            c0, c1 = (j * w) // bins, -((-(j + 1) * w) // bins)
            out[:, :, i, j] = x[:, :, r0:r1, c0:c1].mean(axis=(2, 3), dtype=np.float64)
    return out


def linear(v: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Fully connected layer on (n, in_features) rows."""
    return (v @ weight.T + bias).astype(DTYPE)
