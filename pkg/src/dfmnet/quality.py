"""Boundary-alignment analysis of RGB/depth pairs.

Edges are taken from both modalities with a Sobel detector, and the overlap
of the two binary edge maps is scored with Dice at three scales. Aligned,
good-quality depth should score higher than a randomly mismatched pairing.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .images import ImagePair, denormalize_depth, denormalize_rgb
from .nn import maxpool2
from .tensor import ShapeError

DEFAULT_THRESHOLD = 0.1
DICE_EPS = 1e-8
EDGE_EPS = 1e-8
N_SCALES = 3
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class QualityReport:
    dice_per_scale: List[float]
    mean_dice: float
    edge_pixel_counts: Dict[str, int]
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def to_luma(img: np.ndarray) -> np.ndarray:
    """Reduce (h, w), (h, w, 3), (1, c, h, w) or (c, h, w) input to an (h, w) float64 image."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 4:
        if a.shape[0] != 1:
            raise ShapeError(f"expected a single image, got batch of {a.shape[0]}")
        a = a[0]
    if a.ndim == 3:
        if a.shape[0] == 3:
            return np.tensordot(LUMA, a, axes=(0, 0))
        if a.shape[-1] == 3:
            return a @ LUMA
        if a.shape[0] == 1:
            return a[0]
        raise ShapeError(f"cannot interpret image of shape {a.shape}")
    if a.ndim != 2:
        raise ShapeError(f"cannot interpret image of shape {a.shape}")
    return a


def edge_map(img: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Binary edge map: Sobel magnitude / max magnitude >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    g = to_luma(img)
    if g.size == 0:
        raise ShapeError("edge_map of an empty image")
    gx = ndimage.sobel(g, axis=1, mode="nearest")
    gy = ndimage.sobel(g, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    norm = mag / (mag.max() + EDGE_EPS)
    return (norm >= threshold).astype(np.uint8)


def dice_binary(a: np.ndarray, b: np.ndarray) -> float:
    """2|a & b| / (|a| + |b| + eps), rounded to float32 precision."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"dice inputs differ in shape: {a.shape} vs {b.shape}")
    a = a != 0
    b = b != 0
    inter = int(np.count_nonzero(a & b))
    total = int(np.count_nonzero(a)) + int(np.count_nonzero(b))
    return float(np.float32(2.0 * inter / (total + DICE_EPS)))


def _pool_binary(m: np.ndarray) -> np.ndarray:
    return maxpool2(m.astype(np.float32)[None, None])[0, 0]


def multiscale_dice(ea: np.ndarray, eb: np.ndarray, n_scales: int = N_SCALES) -> List[float]:
    scores = []
    for s in range(n_scales):
        if s:
            ea, eb = _pool_binary(ea), _pool_binary(eb)
        scores.append(dice_binary(ea, eb))
    return scores


def report_from_images(rgb: np.ndarray, depth: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> QualityReport:
    """Boundary-alignment report for an RGB image and a depth image in [0, 1]."""
    e_rgb = edge_map(rgb, threshold)
    e_depth = edge_map(depth, threshold)
    dice = multiscale_dice(e_rgb, e_depth)
    return QualityReport(
        dice_per_scale=dice,
        mean_dice=float(np.mean(dice)),
        edge_pixel_counts={"rgb": int(e_rgb.sum()), "depth": int(e_depth.sum())},
        threshold=float(threshold),
    )


def ba_report(pair: ImagePair, threshold: float = DEFAULT_THRESHOLD) -> QualityReport:
    return report_from_images(denormalize_rgb(pair.rgb), denormalize_depth(pair.depth), threshold)


def derangement(n: int, seed: int) -> np.ndarray:
    """Seeded random permutation with no fixed points (rejection sampling)."""
    if n < 2:
        raise ValueError("a derangement needs at least 2 items")
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    while True:
        perm = rng.permutation(n)
        if not (perm == idx).any():
            return perm


def distribution_stats(reports: Sequence[QualityReport], mismatch_seed: Optional[int],
                       threshold: float) -> dict:
    means = np.array([r.mean_dice for r in reports], dtype=np.float64)
    per_scale = np.array([r.dice_per_scale for r in reports], dtype=np.float64)
    return {
        "pairs": len(reports),
        "mean_dice": float(means.mean()),
        "median": float(np.median(means)),
        "per_scale_means": [float(v) for v in per_scale.mean(axis=0)],
        "deciles": [float(v) for v in np.percentile(means, np.arange(10, 100, 10))],
        "mismatch_seed": mismatch_seed,
        "threshold": float(threshold),
    }


def ba_distribution(pairs: Sequence[ImagePair], mismatch_seed: Optional[int] = None,
                    threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Corpus statistics of per-pair mean Dice, optionally after deranging depth against RGB."""
    if not pairs:
        raise ValueError("ba_distribution needs at least one pair")
    rgbs = [denormalize_rgb(p.rgb) for p in pairs]
    depths = [denormalize_depth(p.depth) for p in pairs]
    if mismatch_seed is not None:
        if len(pairs) < 2:
            raise ValueError("mismatch mode needs at least 2 pairs")
        perm = derangement(len(pairs), mismatch_seed)
        depths = [depths[j] for j in perm]
    reports = [report_from_images(r, d, threshold) for r, d in zip(rgbs, depths)]
    return distribution_stats(reports, mismatch_seed, threshold)


# --- synthetic scenes -------------------------------------------------------

def synthetic_pair(seed: int, size: int = 256, noise: float = 2.0):
    """A random scene of 1-3 shapes; returns (rgb HxWx3 uint8, depth HxW uint8).

    Object boundaries coincide in both modalities, so the pair is aligned.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    bg = rng.uniform(40, 90, size=3)
    tilt = rng.uniform(-20, 20, size=3)
    rgb = bg[None, None, :] + tilt[None, None, :] * (xx / size)[:, :, None]
    depth = 30.0 + 20.0 * (yy / size)
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(0.25, 0.75, size=2) * size
        ry, rx = rng.uniform(0.08, 0.22, size=2) * size
        if rng.random() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        rgb[mask] = rng.uniform(150, 240, size=3)
        depth[mask] = rng.uniform(120, 250)
    rgb += rng.normal(0.0, noise, size=rgb.shape)
    depth += rng.normal(0.0, noise, size=depth.shape)
    return (np.clip(np.rint(rgb), 0, 255).astype(np.uint8),
            np.clip(np.rint(depth), 0, 255).astype(np.uint8))


def square_pair(shift: int, size: int = 64, half: int = 12):
    """Bright square in RGB and a depth square displaced by ``shift`` pixels to the right."""
    rgb = np.full((size, size, 3), 30, dtype=np.uint8)
    depth = np.full((size, size), 30, dtype=np.uint8)
    c = size // 2
    rgb[c - half:c + half, c - half:c + half] = 220
    depth[c - half:c + half, c - half + shift:c + half + shift] = 220
    return rgb, depth
