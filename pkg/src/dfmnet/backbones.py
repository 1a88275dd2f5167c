"""Feature encoders: the tailored depth backbone and the MobileNet-v2-style RGB branch.

Both produce five hierarchies with channels (16, 24, 32, 96, 320) at output
strides (2, 4, 8, 16, 16). The RGB branch is exposed stage by stage because
fused features are fed back into it between hierarchies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np

from .blocks import Manifest, conv_bn_manifest, fold_conv_bn
from .nn import ConvParams, conv2d, relu
from .tensor import ShapeError, Tensor

HIERARCHY_CHANNELS = (16, 24, 32, 96, 320)
HIERARCHY_STRIDES = (2, 4, 8, 16, 16)


@dataclass(frozen=True)
class IrbSpec:
    t: int  # expansion factor
    c: int  # output channels
    n: int  # repeats
    s: int  # stride of the first repeat

    def __post_init__(self):
        if self.t < 1 or self.n < 1 or self.s not in (1, 2):
            raise ValueError(f"invalid IRB spec {self}")


# one list of IrbSpec per hierarchy
TDB_SPECS: tuple[tuple[IrbSpec, ...], ...] = (
    (IrbSpec(3, 16, 1, 2),),
    (IrbSpec(3, 24, 3, 2),),
    (IrbSpec(3, 32, 7, 2),),
    (IrbSpec(2, 96, 3, 2),),
    (IrbSpec(2, 320, 1, 1),),
)

# stride-2 stem (3 -> 32) precedes hierarchy 1; the last hierarchy keeps stride 1
MOBILENET_STEM_CHANNELS = 32
MOBILENET_SPECS: tuple[tuple[IrbSpec, ...], ...] = (
    (IrbSpec(1, 16, 1, 1),),
    (IrbSpec(6, 24, 2, 2),),
    (IrbSpec(6, 32, 3, 2),),
    (IrbSpec(6, 64, 4, 2), IrbSpec(6, 96, 3, 1)),
    (IrbSpec(6, 160, 3, 1), IrbSpec(6, 320, 1, 1)),
)


@dataclass(frozen=True)
class IrbBlock:
    """Folded weights of one inverted residual bottleneck."""

    expand: ConvParams
    depthwise: ConvParams
    project: ConvParams
    residual: bool

    @property
    def in_channels(self) -> int:
        return self.expand.in_channels

    def __call__(self, x: Tensor) -> Tensor:
        return irb_forward(x, self)


def irb_forward(x: Tensor, block: IrbBlock) -> Tensor:
    """expand 1x1 (ReLU) -> depthwise 3x3 (ReLU) -> linear 1x1 projection, plus skip."""
    if x.shape[1] != block.in_channels:
        raise ShapeError(f"IRB expects {block.in_channels} channels, got {x.shape[1]}")
    y = relu(conv2d(x, block.expand))
    y = relu(conv2d(y, block.depthwise))
    y = conv2d(y, block.project)
    if block.residual:
        y += x
    return y


def _block_names(prefix: str, specs: Sequence[IrbSpec]):
    j = 0
    for spec in specs:
        for r in range(spec.n):
            yield f"{prefix}.block{j}", spec, (spec.s if r == 0 else 1)
            j += 1


def irb_manifest(prefix: str, c_in: int, spec: IrbSpec) -> Manifest:
    hidden = spec.t * c_in
    m = conv_bn_manifest(f"{prefix}.expand", c_in, hidden, 1)
    m.update(conv_bn_manifest(f"{prefix}.dw", hidden, hidden, 3, groups=hidden))
    m.update(conv_bn_manifest(f"{prefix}.project", hidden, spec.c, 1))
    return m


def build_irb(w: Mapping[str, np.ndarray], prefix: str, c_in: int, spec: IrbSpec, stride: int) -> IrbBlock:
    hidden = spec.t * c_in
    return IrbBlock(
        expand=fold_conv_bn(w, f"{prefix}.expand"),
        depthwise=fold_conv_bn(w, f"{prefix}.dw", stride=stride, padding=1, groups=hidden),
        project=fold_conv_bn(w, f"{prefix}.project"),
        residual=(stride == 1 and c_in == spec.c),
    )


def backbone_manifest(prefix: str, in_channels: int, specs, stem_channels: Optional[int]) -> Manifest:
    m: Manifest = {}
    c = in_channels
    if stem_channels is not None:
        m.update(conv_bn_manifest(f"{prefix}.stem", in_channels, stem_channels, 3))
        c = stem_channels
    for i, level in enumerate(specs, start=1):
        for name, spec, _ in _block_names(f"{prefix}.h{i}", level):
            m.update(irb_manifest(name, c, spec))
            c = spec.c
    return m


def tdb_manifest(prefix: str = "tdb") -> Manifest:
    return backbone_manifest(prefix, 1, TDB_SPECS, None)


def mobilenet_manifest(prefix: str, in_channels: int) -> Manifest:
    return backbone_manifest(prefix, in_channels, MOBILENET_SPECS, MOBILENET_STEM_CHANNELS)


class Backbone:
    """Five-hierarchy encoder built from folded weights."""

    def __init__(self, w: Mapping[str, np.ndarray], prefix: str, in_channels: int, specs,
                 stem_channels: Optional[int] = None):
        self.prefix = prefix
        self.in_channels = in_channels
        self.stem: Optional[ConvParams] = None
        c = in_channels
        if stem_channels is not None:
            self.stem = fold_conv_bn(w, f"{prefix}.stem", stride=2, padding=1)
            c = stem_channels
        self.stages: List[List[IrbBlock]] = []
        for i, level in enumerate(specs, start=1):
            blocks = []
            for name, spec, stride in _block_names(f"{prefix}.h{i}", level):
                blocks.append(build_irb(w, name, c, spec, stride))
                c = spec.c
            self.stages.append(blocks)

    def stage(self, i: int, x: Tensor) -> Tensor:
        """Run hierarchy ``i`` (1-based); the stem is part of hierarchy 1."""
        if not 1 <= i <= len(self.stages):
            raise ValueError(f"hierarchy index must be in 1..{len(self.stages)}, got {i}")
        if i == 1 and self.stem is not None:
            if x.shape[1] != self.stem.in_channels:
                raise ShapeError(f"stem expects {self.stem.in_channels} channels, got {x.shape[1]}")
            x = relu(conv2d(x, self.stem))
        for block in self.stages[i - 1]:
            x = block(x)
        return x

    def forward(self, x: Tensor) -> List[Tensor]:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"{self.prefix} expects {self.in_channels}-channel input, got {x.shape}")
        feats = []
        for i in range(1, len(self.stages) + 1):
            x = self.stage(i, x)
            feats.append(x)
        return feats


def tailored_depth_backbone(w: Mapping[str, np.ndarray], prefix: str = "tdb") -> Backbone:
    return Backbone(w, prefix, 1, TDB_SPECS)


def mobilenet_branch(w: Mapping[str, np.ndarray], prefix: str, in_channels: int) -> Backbone:
    return Backbone(w, prefix, in_channels, MOBILENET_SPECS, MOBILENET_STEM_CHANNELS)


def tdb_forward(depth: Tensor, w: Mapping[str, np.ndarray]) -> List[Tensor]:
    if depth.ndim != 4 or depth.shape[1:] != (1, 256, 256):
        raise ShapeError(f"TDB expects (n, 1, 256, 256) depth, got {depth.shape}")
    return tailored_depth_backbone(w).forward(depth)


def rgb_stage(i: int, x: Tensor, w: Mapping[str, np.ndarray]) -> Tensor:
    return mobilenet_branch(w, "rgb", 3).stage(i, x)


def tdb_param_count() -> int:
    """Closed-form TDB parameter count from the IRB table.

    Counts learnable values only: conv weights plus BN scale and shift
    (running statistics are buffers, not parameters).
    """
    total = 0
    c_in = 1
    for level in TDB_SPECS:
        for spec in level:
            for _ in range(spec.n):
                hidden = spec.t * c_in
                total += c_in * hidden + 2 * hidden      # expand + BN
                total += 9 * hidden + 2 * hidden         # depthwise + BN
                total += hidden * spec.c + 2 * spec.c    # project + BN
                c_in = spec.c
    return total
