"""Depth quality-inspired feature manipulation.

The weighting branch turns the alignment between low-level RGB and depth
activations into five scalar gates (alpha). The holistic attention branch
turns high-level depth features, recalibrated by common edge activation,
into a spatial map (beta) that is resized once per hierarchy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping, Sequence

import numpy as np

from .blocks import Manifest, conv_bn_manifest, fc_manifest, fold_conv_bn
from .nn import ConvParams, bilinear_resize, conv2d, linear, maxpool2, relu, sigmoid
from .tensor import ShapeError, Tensor, concat_channels, ewise_add, ewise_mul, gap

TRANSFER_WIDTH = 16
N_SCALES = 3
MLP_HIDDEN = TRANSFER_WIDTH * N_SCALES // 2
ALIGN_EPS = 1e-8
MAX_RECALIB = 3


@dataclass(frozen=True)
class AlignmentVector:
    values: np.ndarray  # (n, c)
    scale_index: int = 0


@dataclass
class DqfmGates:
    alpha: np.ndarray                     # (n, 5)
    betas: List[Tensor] = field(default_factory=list)  # five (n, 1, h_i, w_i) maps


@dataclass(frozen=True)
class DqwParams:
    transfer_r: ConvParams
    transfer_d: ConvParams
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray

    @classmethod
    def from_weights(cls, w: Mapping[str, np.ndarray], prefix: str = "dqw") -> "DqwParams":
        return cls(
            fold_conv_bn(w, f"{prefix}.transfer_r"),
            fold_conv_bn(w, f"{prefix}.transfer_d"),
            np.asarray(w[f"{prefix}.fc1.weight"]), np.asarray(w[f"{prefix}.fc1.bias"]),
            np.asarray(w[f"{prefix}.fc2.weight"]), np.asarray(w[f"{prefix}.fc2.bias"]),
        )


@dataclass(frozen=True)
class DhaParams:
    compress: ConvParams    # 1x1, 320 -> 16
    transfer_r: ConvParams
    transfer_d: ConvParams
    dconv: ConvParams       # 3x3, dilation 2, shared by every recalibration
    head: ConvParams        # 3x3, 16 -> 1, sigmoid

    @classmethod
    def from_weights(cls, w: Mapping[str, np.ndarray], prefix: str = "dha") -> "DhaParams":
        return cls(
            fold_conv_bn(w, f"{prefix}.compress"),
            fold_conv_bn(w, f"{prefix}.transfer_r"),
            fold_conv_bn(w, f"{prefix}.transfer_d"),
            fold_conv_bn(w, f"{prefix}.dconv", padding=2, dilation=2),
            fold_conv_bn(w, f"{prefix}.head", padding=1),
        )


def dqw_manifest(n_alpha: int = 5, prefix: str = "dqw", c_low: int = 16) -> Manifest:
    m = conv_bn_manifest(f"{prefix}.transfer_r", c_low, TRANSFER_WIDTH, 1)
    m.update(conv_bn_manifest(f"{prefix}.transfer_d", c_low, TRANSFER_WIDTH, 1))
    m.update(fc_manifest(f"{prefix}.fc1", TRANSFER_WIDTH * N_SCALES, MLP_HIDDEN))
    m.update(fc_manifest(f"{prefix}.fc2", MLP_HIDDEN, n_alpha))
    return m


def dha_manifest(prefix: str = "dha", c_low: int = 16, c_high: int = 320) -> Manifest:
    m = conv_bn_manifest(f"{prefix}.compress", c_high, TRANSFER_WIDTH, 1)
    m.update(conv_bn_manifest(f"{prefix}.transfer_r", c_low, TRANSFER_WIDTH, 1))
    m.update(conv_bn_manifest(f"{prefix}.transfer_d", c_low, TRANSFER_WIDTH, 1))
    m.update(conv_bn_manifest(f"{prefix}.dconv", TRANSFER_WIDTH, TRANSFER_WIDTH, 3))
    m.update(conv_bn_manifest(f"{prefix}.head", TRANSFER_WIDTH, 1, 3))
    return m


def transfer(f: Tensor, p: ConvParams) -> Tensor:
    """1x1 conv + folded BN + ReLU."""
    if f.shape[1] != p.in_channels:
        raise ShapeError(f"transfer expects {p.in_channels} channels, got {f.shape[1]}")
    return relu(conv2d(f, p))


def alignment_vector(f_rt: Tensor, f_dt: Tensor, scale_index: int = 0) -> AlignmentVector:
    """Soft Dice-like overlap per channel: GAP(a*b) / (GAP(a+b) + eps)."""
    if f_rt.shape != f_dt.shape:
        raise ShapeError(f"alignment inputs differ in shape: {f_rt.shape} vs {f_dt.shape}")
    num = gap(ewise_mul(f_rt, f_dt))
    den = gap(ewise_add(f_rt, f_dt))
    v = num / (den + np.float32(ALIGN_EPS))
    return AlignmentVector(v[:, :, 0, 0], scale_index)


def multiscale_alignment(f_rt: Tensor, f_dt: Tensor) -> np.ndarray:
    """Alignment at full, 1/2 and 1/4 scale (max-pooled), concatenated in that order."""
    vs = []
    a, b = f_rt, f_dt
    for s in range(N_SCALES):
        if s:
            a, b = maxpool2(a), maxpool2(b)
        vs.append(alignment_vector(a, b, s).values)
    return np.concatenate(vs, axis=1)


def dqw(f_r1: Tensor, f_d1: Tensor, p: DqwParams) -> np.ndarray:
    """Five (or one, for identical gating) weights in (0, 1) per sample."""
    v = multiscale_alignment(transfer(f_r1, p.transfer_r), transfer(f_d1, p.transfer_d))
    hidden = relu(linear(v, p.fc1_weight, p.fc1_bias))
    return sigmoid(linear(hidden, p.fc2_weight, p.fc2_bias))


def recalibrate(x: Tensor, f_ec: Tensor, dconv: ConvParams) -> Tensor:
    """One recalibration: halve, dilated conv (ReLU), restore size."""
    h, w = x.shape[2], x.shape[3]
    y = bilinear_resize(ewise_add(x, f_ec), h // 2, w // 2)
    y = relu(conv2d(y, dconv))
    return bilinear_resize(y, h, w)


def dha(f_r1: Tensor, f_d1: Tensor, f_d5: Tensor, p: DhaParams, recalib_times: int = 2) -> Tensor:
    if not 0 <= recalib_times <= MAX_RECALIB:
        raise ValueError(f"recalib_times must be in 0..{MAX_RECALIB}, got {recalib_times}")
    if f_d5.shape[1] != p.compress.in_channels:
        raise ShapeError(f"DHA expects {p.compress.in_channels}-channel high-level depth, got {f_d5.shape}")
    h, w = f_r1.shape[2], f_r1.shape[3]
    f_dht = bilinear_resize(relu(conv2d(f_d5, p.compress)), h, w)
    f_ec = ewise_mul(transfer(f_r1, p.transfer_r), transfer(f_d1, p.transfer_d))
    x = f_dht
    for _ in range(recalib_times):
        x = recalibrate(x, f_ec, p.dconv)
    return sigmoid(conv2d(ewise_add(f_ec, x), p.head))


def hierarchy_sizes(h: int, w: int) -> List[tuple[int, int]]:
    """Spatial sizes of the five hierarchies given the hierarchy-1 size."""
    return [(h, w), (h // 2, w // 2), (h // 4, w // 4), (h // 8, w // 8), (h // 8, w // 8)]


def downsample_betas(beta: Tensor, sizes: Sequence[tuple[int, int]] | None = None) -> List[Tensor]:
    if beta.ndim != 4 or beta.shape[1] != 1:
        raise ShapeError(f"beta must be a single-channel map, got {beta.shape}")
    if sizes is None:
        sizes = hierarchy_sizes(beta.shape[2], beta.shape[3])
    out = []
    for hh, ww in sizes:
        out.append(beta if (hh, ww) == beta.shape[2:] else bilinear_resize(beta, hh, ww))
    return out


def shared_betas(beta: Tensor, sizes: Sequence[tuple[int, int]] | None = None) -> List[Tensor]:
    """Identical gating: one coarse map (the smallest hierarchy size) resized to every level."""
    if sizes is None:
        sizes = hierarchy_sizes(beta.shape[2], beta.shape[3])
    hh, ww = min(sizes)
    base = bilinear_resize(beta, hh, ww)
    return [base if (h, w) == (hh, ww) else bilinear_resize(base, h, w) for h, w in sizes]
