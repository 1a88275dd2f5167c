"""PPM context head and the two-stage (pre-fusion / full-fusion) decoder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Sequence

import numpy as np

from .blocks import (Manifest, conv_bn_manifest, conv_manifest, dsconv_manifest, fc_manifest,
                     fold_conv_bn, fold_dsconv, plain_conv)
from .nn import ConvParams, adaptive_avg_pool, bilinear_resize, conv2d, linear, relu, sigmoid
from .tensor import ShapeError, Tensor, concat_channels, ewise_add, ewise_mul, gap

PPM_BINS = (1, 2, 3, 6)
PPM_BRANCH = 80
PPM_OUT = 96
DEC_WIDTH = 16
CA_HIDDEN = 4
HEAD_WIDTH = 16
# decoder inputs f_c^1..f_c^6
DECODER_IN_CHANNELS = (16, 24, 32, 96, 320, PPM_OUT)


def ppm_manifest(c_in: int = 320, prefix: str = "ppm") -> Manifest:
    m: Manifest = {}
    for b in PPM_BINS:
        m.update(conv_bn_manifest(f"{prefix}.bin{b}", c_in, PPM_BRANCH, 1))
    m.update(conv_bn_manifest(f"{prefix}.bottleneck", PPM_BRANCH * len(PPM_BINS), PPM_OUT, 3))
    return m


def decoder_manifest(prefix: str = "decoder") -> Manifest:
    m: Manifest = {}
    for i, c in enumerate(DECODER_IN_CHANNELS, start=1):
        m.update(dsconv_manifest(f"{prefix}.cp{i}", c, DEC_WIDTH))
        m.update(fc_manifest(f"{prefix}.ca{i}.fc1", DEC_WIDTH, CA_HIDDEN))
        m.update(fc_manifest(f"{prefix}.ca{i}.fc2", CA_HIDDEN, DEC_WIDTH))
    m.update(dsconv_manifest(f"{prefix}.head.ds1", 2 * DEC_WIDTH, HEAD_WIDTH))
    m.update(dsconv_manifest(f"{prefix}.head.ds2", HEAD_WIDTH, HEAD_WIDTH))
    m.update(conv_manifest(f"{prefix}.head.out", HEAD_WIDTH, 1, 3))
    return m


def head_d_manifest(c_in: int = 320, prefix: str = "head_d") -> Manifest:
    return conv_bn_manifest(f"{prefix}.conv", c_in, 1, 1)


@dataclass(frozen=True)
class PpmParams:
    branches: tuple[ConvParams, ...]
    bottleneck: ConvParams

    @classmethod
    def from_weights(cls, w, prefix: str = "ppm") -> "PpmParams":
        return cls(tuple(fold_conv_bn(w, f"{prefix}.bin{b}") for b in PPM_BINS),
                   fold_conv_bn(w, f"{prefix}.bottleneck", padding=1))


@dataclass(frozen=True)
class CompressParams:
    dw: ConvParams
    pw: ConvParams
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray


@dataclass(frozen=True)
class HeadParams:
    ds1: tuple[ConvParams, ConvParams]
    ds2: tuple[ConvParams, ConvParams]
    out: ConvParams


@dataclass(frozen=True)
class DecoderParams:
    compress: tuple[CompressParams, ...]
    head: HeadParams

    @classmethod
    def from_weights(cls, w: Mapping[str, np.ndarray], prefix: str = "decoder") -> "DecoderParams":
        comp = []
        for i, c in enumerate(DECODER_IN_CHANNELS, start=1):
            dw, pw = fold_dsconv(w, f"{prefix}.cp{i}", c)
            comp.append(CompressParams(
                dw, pw,
                np.asarray(w[f"{prefix}.ca{i}.fc1.weight"]), np.asarray(w[f"{prefix}.ca{i}.fc1.bias"]),
                np.asarray(w[f"{prefix}.ca{i}.fc2.weight"]), np.asarray(w[f"{prefix}.ca{i}.fc2.bias"]),
            ))
        head = HeadParams(
            fold_dsconv(w, f"{prefix}.head.ds1", 2 * DEC_WIDTH),
            fold_dsconv(w, f"{prefix}.head.ds2", HEAD_WIDTH),
            plain_conv(w, f"{prefix}.head.out", padding=1),
        )
        return cls(tuple(comp), head)


def ppm(f_c5: Tensor, p: PpmParams) -> Tensor:
    """Pyramid pooling over bins (1, 2, 3, 6), concat, 3x3 fuse."""
    if f_c5.ndim != 4 or f_c5.shape[1] != p.branches[0].in_channels:
        raise ShapeError(f"PPM expects {p.branches[0].in_channels} channels, got {f_c5.shape}")
    h, w = f_c5.shape[2], f_c5.shape[3]
    branches = []
    for bins, conv in zip(PPM_BINS, p.branches):
        y = relu(conv2d(adaptive_avg_pool(f_c5, bins), conv))
        branches.append(bilinear_resize(y, h, w))
    return relu(conv2d(concat_channels(branches), p.bottleneck))


def dsconv(x: Tensor, dw: ConvParams, pw: ConvParams) -> Tensor:
    return relu(conv2d(relu(conv2d(x, dw)), pw))


def channel_attention(x: Tensor, fc1_w, fc1_b, fc2_w, fc2_b) -> Tensor:
    s = gap(x)[:, :, 0, 0]
    s = sigmoid(linear(relu(linear(s, fc1_w, fc1_b)), fc2_w, fc2_b))
    return ewise_mul(x, s[:, :, None, None])


def compress_enhance(f: Tensor, p: CompressParams) -> Tensor:
    x = dsconv(f, p.dw, p.pw)
    return channel_attention(x, p.fc1_weight, p.fc1_bias, p.fc2_weight, p.fc2_bias)


def group_hierarchies(compressed: Sequence[Tensor]) -> tuple[Tensor, Tensor]:
    """low = cf1 + up(cf2) + up(cf3) at cf1's size; high = cf4 + cf5 + cf6."""
    if len(compressed) != 6:
        raise ShapeError(f"expected six compressed hierarchies, got {len(compressed)}")
    cf = compressed
    h, w = cf[0].shape[2], cf[0].shape[3]
    if cf[1].shape[2:] != (h // 2, w // 2) or cf[2].shape[2:] != (h // 4, w // 4):
        raise ShapeError("low-level hierarchies must be at 1, 1/2 and 1/4 of hierarchy-1 size")
    if not cf[3].shape == cf[4].shape == cf[5].shape:
        raise ShapeError("high-level hierarchies must share one shape")
    low = ewise_add(ewise_add(cf[0], bilinear_resize(cf[1], h, w)), bilinear_resize(cf[2], h, w))
    high = ewise_add(ewise_add(cf[3], cf[4]), cf[5])
    return low, high


def full_fusion(low: Tensor, high: Tensor, p: HeadParams, out_size: tuple[int, int] | None = None) -> Tensor:
    """Concat low with upsampled high, prediction head, sigmoid, 2x upsample."""
    if low.shape[1] != DEC_WIDTH or high.shape[1] != DEC_WIDTH:
        raise ShapeError(f"full fusion expects {DEC_WIDTH}-channel inputs, got {low.shape}, {high.shape}")
    h, w = low.shape[2], low.shape[3]
    x = concat_channels([low, bilinear_resize(high, h, w)])
    x = dsconv(x, *p.ds1)
    x = dsconv(x, *p.ds2)
    s = sigmoid(conv2d(x, p.out))
    oh, ow = out_size if out_size is not None else (2 * h, 2 * w)
    return bilinear_resize(s, oh, ow)


def pred_head_d(f_d5: Tensor, conv: ConvParams, out_size: tuple[int, int] | None = None) -> Tensor:
    """Coarse depth-branch saliency: 1x1 conv + BN, sigmoid, 16x upsample."""
    if f_d5.ndim != 4 or f_d5.shape[1] != conv.in_channels:
        raise ShapeError(f"depth head expects {conv.in_channels} channels, got {f_d5.shape}")
    s = sigmoid(conv2d(f_d5, conv))
    oh, ow = out_size if out_size is not None else (16 * f_d5.shape[2], 16 * f_d5.shape[3])
    return bilinear_resize(s, oh, ow)


def decode(features: Sequence[Tensor], p: DecoderParams, out_size: tuple[int, int] | None = None) -> Tensor:
    """Pre-fusion then full-fusion over f_c^1..f_c^6."""
    compressed: List[Tensor] = [compress_enhance(f, cp) for f, cp in zip(features, p.compress)]
    low, high = group_hierarchies(compressed)
    return full_fusion(low, high, p.head, out_size)
