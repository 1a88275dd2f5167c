"""Manifest fragments and weight-folding helpers shared by the network modules.

A manifest is an ordered ``{name: shape}`` table. Convolutions followed by
batch norm store ``<prefix>.weight`` plus ``<prefix>.bn.{gamma,beta,mean,var}``
and carry no bias; plain convolutions and fully connected layers store
``<prefix>.weight`` and ``<prefix>.bias``.
"""
from __future__ import annotations

from typing import Dict, Mapping, Tuple

import numpy as np

from .nn import BN_EPS, BnParams, ConvParams, batchnorm_fold

Manifest = Dict[str, Tuple[int, ...]]

BN_FIELDS = ("gamma", "beta", "mean", "var")


def conv_bn_manifest(prefix: str, c_in: int, c_out: int, k: int, groups: int = 1) -> Manifest:
    m: Manifest = {f"{prefix}.weight": (c_out, c_in // groups, k, k)}
    for f in BN_FIELDS:
        m[f"{prefix}.bn.{f}"] = (c_out,)
    return m


def conv_manifest(prefix: str, c_in: int, c_out: int, k: int) -> Manifest:
    return {f"{prefix}.weight": (c_out, c_in, k, k), f"{prefix}.bias": (c_out,)}


def fc_manifest(prefix: str, n_in: int, n_out: int) -> Manifest:
    return {f"{prefix}.weight": (n_out, n_in), f"{prefix}.bias": (n_out,)}


def dsconv_manifest(prefix: str, c_in: int, c_out: int) -> Manifest:
    m = conv_bn_manifest(f"{prefix}.dw", c_in, c_in, 3, groups=c_in)
    m.update(conv_bn_manifest(f"{prefix}.pw", c_in, c_out, 1))
    return m


def fold_conv_bn(w: Mapping[str, np.ndarray], prefix: str, stride: int = 1, padding: int = 0,
                 dilation: int = 1, groups: int = 1) -> ConvParams:
    conv = ConvParams.create(w[f"{prefix}.weight"], None, stride, padding, dilation, groups)
    bn = BnParams(*(np.asarray(w[f"{prefix}.bn.{f}"], dtype=np.float32) for f in BN_FIELDS), BN_EPS)
    return batchnorm_fold(conv, bn)


def plain_conv(w: Mapping[str, np.ndarray], prefix: str, stride: int = 1, padding: int = 0,
               dilation: int = 1) -> ConvParams:
    return ConvParams.create(w[f"{prefix}.weight"], w[f"{prefix}.bias"], stride, padding, dilation)


def fold_dsconv(w: Mapping[str, np.ndarray], prefix: str, c_in: int) -> tuple[ConvParams, ConvParams]:
    dw = fold_conv_bn(w, f"{prefix}.dw", padding=1, groups=c_in)
    pw = fold_conv_bn(w, f"{prefix}.pw")
    return dw, pw
