"""Full network assembly, loss and parameter statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import backbones, decoder, dqfm
from .blocks import Manifest, fold_conv_bn
from .tensor import ShapeError, Tensor, ewise_add, ewise_mul
from .weights import ModelWeights, encoded_size

INPUT_SIZE = 256
N_HIERARCHIES = 5
LOSS_CLAMP = 1e-7
BYTES_PER_PARAM = 4
MIB = float(1 << 20)

GATING_MODES = ("multiple", "identical")
DEPTH_BACKBONES = ("tdb", "mobilenet_like")


@dataclass(frozen=True)
class ModelConfig:
    use_dqw: bool = True
    use_dha: bool = True
    recalib_times: int = 2
    gating: str = "multiple"
    depth_backbone: str = "tdb"

    def __post_init__(self):
        if not 0 <= self.recalib_times <= dqfm.MAX_RECALIB:
            raise ValueError(f"recalib_times must be in 0..{dqfm.MAX_RECALIB}, got {self.recalib_times}")
        if self.gating not in GATING_MODES:
            raise ValueError(f"gating must be one of {GATING_MODES}, got {self.gating!r}")
        if self.depth_backbone not in DEPTH_BACKBONES:
            raise ValueError(f"depth_backbone must be one of {DEPTH_BACKBONES}, got {self.depth_backbone!r}")

    @property
    def n_alpha(self) -> int:
        return N_HIERARCHIES if self.gating == "multiple" else 1

    @property
    def depth_prefix(self) -> str:
        return "tdb" if self.depth_backbone == "tdb" else "depth_mbv2"


@dataclass
class InferenceOutput:
    s_c: Tensor
    s_d: Tensor
    gates: dqfm.DqfmGates


@dataclass(frozen=True)
class LossValue:
    total: float
    l_c: float
    l_d: float


def build_manifest(cfg: ModelConfig = ModelConfig()) -> Manifest:
    """Every learned entry of the network, in file order.

    DQW/DHA weights are always present so ablated configurations can load the
    same file; the ablation flags only bypass them at run time.
    """
    m: Manifest = {}
    m.update(backbones.mobilenet_manifest("rgb", 3))
    if cfg.depth_backbone == "tdb":
        m.update(backbones.tdb_manifest("tdb"))
    else:
        m.update(backbones.mobilenet_manifest("depth_mbv2", 1))
    m.update(dqfm.dqw_manifest(cfg.n_alpha))
    m.update(dqfm.dha_manifest())
    m.update(decoder.ppm_manifest())
    m.update(decoder.decoder_manifest())
    m.update(decoder.head_d_manifest())
    return m


def _check_input(t: Tensor, channels: int, what: str) -> None:
    if t.ndim != 4 or t.shape[1] != channels or t.shape[2] % 16 or t.shape[3] % 16:
        raise ShapeError(f"{what} must be (n, {channels}, h, w) with h, w divisible by 16; got {t.shape}")


class DFMNet:
    """Network with batch norm folded once at construction; immutable afterwards."""

    def __init__(self, weights: ModelWeights | Mapping[str, np.ndarray], cfg: ModelConfig = ModelConfig()):
        w = weights.entries if isinstance(weights, ModelWeights) else weights
        self.cfg = cfg
        self.rgb = backbones.mobilenet_branch(w, "rgb", 3)
        if cfg.depth_backbone == "tdb":
            self.depth = backbones.tailored_depth_backbone(w, "tdb")
        else:
            self.depth = backbones.mobilenet_branch(w, "depth_mbv2", 1)
        # DQW / DHA parameters are only folded when the branch is active
        self.dqw = dqfm.DqwParams.from_weights(w) if cfg.use_dqw else None
        self.dha = dqfm.DhaParams.from_weights(w) if cfg.use_dha else None
        self.ppm = decoder.PpmParams.from_weights(w)
        self.decoder = decoder.DecoderParams.from_weights(w)
        self.head_d = fold_conv_bn(w, "head_d.conv")

    def gates(self, f_r1: Tensor, f_d: Sequence[Tensor]) -> dqfm.DqfmGates:
        n = f_r1.shape[0]
        sizes = [tuple(f.shape[2:]) for f in f_d]
        if self.dqw is not None:
            alpha = dqfm.dqw(f_r1, f_d[0], self.dqw)
            if alpha.shape[1] == 1:
                alpha = np.repeat(alpha, N_HIERARCHIES, axis=1)
        else:
            alpha = np.ones((n, N_HIERARCHIES), dtype=np.float32)
        if self.dha is not None:
            beta = dqfm.dha(f_r1, f_d[0], f_d[-1], self.dha, self.cfg.recalib_times)
            if self.cfg.gating == "multiple":
                betas = dqfm.downsample_betas(beta, sizes)
            else:
                betas = dqfm.shared_betas(beta, sizes)
        else:
            betas = [np.ones((n, 1) + s, dtype=np.float32) for s in sizes]
        return dqfm.DqfmGates(alpha, betas)

    def forward(self, rgb: Tensor, depth: Tensor, *, alpha_override: Optional[float] = None,
                beta_override: Optional[float] = None, prune_depth: bool = False) -> InferenceOutput:
        """Run the network.

        ``alpha_override`` / ``beta_override`` replace the computed gates with a
        constant and ``prune_depth`` drops the depth term from the fusion sum;
        these are diagnostic hooks for the gating-equivalence checks.
        """
        _check_input(rgb, 3, "rgb")
        _check_input(depth, 1, "depth")
        if rgb.shape[0] != depth.shape[0] or rgb.shape[2:] != depth.shape[2:]:
            raise ShapeError(f"rgb {rgb.shape} and depth {depth.shape} disagree")
        rgb = np.asarray(rgb, dtype=np.float32)
        depth = np.asarray(depth, dtype=np.float32)

        f_d = self.depth.forward(depth)
        f_r1 = self.rgb.stage(1, rgb)
        g = self.gates(f_r1, f_d)
        if alpha_override is not None:
            g.alpha = np.full_like(g.alpha, alpha_override)
        if beta_override is not None:
            g.betas = [np.full_like(b, beta_override) for b in g.betas]

        fused: List[Tensor] = []
        f_r = f_r1
        for i in range(N_HIERARCHIES):
            if i:
                f_r = self.rgb.stage(i + 1, fused[-1])
            if prune_depth:
                fused.append(f_r)
                continue
            a = g.alpha[:, i].reshape(-1, 1, 1, 1)
            gate = ewise_mul(g.betas[i], a)
            fused.append(ewise_add(f_r, ewise_mul(f_d[i], gate)))
        fused.append(decoder.ppm(fused[-1], self.ppm))

        out_size = tuple(rgb.shape[2:])
        s_c = decoder.decode(fused, self.decoder, out_size)
        s_d = decoder.pred_head_d(f_d[-1], self.head_d, out_size)
        return InferenceOutput(s_c, s_d, g)

    __call__ = forward


def forward(rgb: Tensor, depth: Tensor, w: ModelWeights, cfg: ModelConfig = ModelConfig()) -> InferenceOutput:
    return DFMNet(w, cfg).forward(rgb, depth)


def bce(s: Tensor, g: Tensor) -> float:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    s = np.clip(np.asarray(s, dtype=np.float64), LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    g = np.asarray(g, dtype=np.float64)
    return float(np.mean(-(g * np.log(s) + (1.0 - g) * np.log1p(-s))))


def loss(s_c: Tensor, s_d: Tensor, g: Tensor) -> LossValue:
    if not (s_c.shape == s_d.shape == g.shape):
        raise ShapeError(f"loss shapes differ: {s_c.shape}, {s_d.shape}, {g.shape}")
    if (g < 0).any() or (g > 1).any():
        raise ValueError("ground truth entries must lie in [0, 1]")
    l_c = bce(s_c, g)
    l_d = bce(s_d, g)
    return LossValue(l_c + l_d, l_c, l_d)


def is_learnable(name: str) -> bool:
    # BN running statistics are buffers, not parameters
    return not (name.endswith(".bn.mean") or name.endswith(".bn.var"))


def param_stats(w: ModelWeights) -> Dict:
    """Parameter counts per top-level module, with the depth backbone isolated.

    ``params`` counts learnable values (weights, biases, BN scale/shift);
    ``stored_values`` also counts BN running statistics. Sizes are 4 bytes per
    value; ``*_mb`` fields use 2**20 bytes.
    """
    modules: Dict[str, Dict[str, int]] = {}
    for name, arr in w.items():
        mod = name.split(".", 1)[0]
        rec = modules.setdefault(mod, {"params": 0, "stored_values": 0})
        rec["stored_values"] += int(arr.size)
        if is_learnable(name):
            rec["params"] += int(arr.size)
    for rec in modules.values():
        rec["bytes"] = BYTES_PER_PARAM * rec["params"]
    total = sum(r["params"] for r in modules.values())
    depth_mod = "tdb" if "tdb" in modules else "depth_mbv2"
    depth_params = modules.get(depth_mod, {}).get("params", 0)
    manifest = w.manifest or {k: tuple(v.shape) for k, v in w.items()}
    return {
        "modules": modules,
        "total_params": total,
        "total_bytes": BYTES_PER_PARAM * total,
        "total_mb": BYTES_PER_PARAM * total / MIB,
        "depth_backbone": depth_mod,
        "tdb_params": depth_params,
        "tdb_bytes": BYTES_PER_PARAM * depth_params,
        "tdb_mb": BYTES_PER_PARAM * depth_params / MIB,
        "file_bytes": encoded_size(manifest),
    }
