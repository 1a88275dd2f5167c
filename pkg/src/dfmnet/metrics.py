"""Saliency evaluation: mean absolute error and maximum F-measure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError

BETA_SQ = 0.3
N_THRESHOLDS = 255
EPS = 1e-8


@dataclass
class MetricResult:
    mae: float
    max_f: float
    f_curve: np.ndarray  # (255,) F-measure at thresholds k/256, k = 1..255

    def to_dict(self) -> dict:
        return {"mae": self.mae, "max_f": self.max_f}


def mae(s: np.ndarray, g: np.ndarray) -> float:
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if s.shape != g.shape:
        raise ShapeError(f"mae shapes differ: {s.shape} vs {g.shape}")
    return float(np.mean(np.abs(s - g)))


def thresholds() -> np.ndarray:
    return np.arange(1, N_THRESHOLDS + 1, dtype=np.float64) / 256.0


def max_fmeasure(s: np.ndarray, g: np.ndarray, beta_sq: float = BETA_SQ) -> tuple[float, np.ndarray]:
    """F-measure at every threshold t (prediction = s >= t) and its maximum."""
    s = np.asarray(s, dtype=np.float64).ravel()
    g = np.asarray(g).ravel()
    if s.shape != g.shape:
        raise ShapeError(f"max_fmeasure shapes differ: {s.shape} vs {g.shape}")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("ground truth must be binary (0/1)")
    pos = g == 1
    pos_scores = np.sort(s[pos])
    all_scores = np.sort(s)
    t = thresholds()
    # counts of entries >= t
    tp = pos_scores.size - np.searchsorted(pos_scores, t, side="left")
    predicted = all_scores.size - np.searchsorted(all_scores, t, side="left")
    precision = tp / (predicted + EPS)
    recall = tp / (pos_scores.size + EPS)
    f = (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall + EPS)
    return float(f.max()), f


def evaluate(s: np.ndarray, g: np.ndarray) -> MetricResult:
    best, curve = max_fmeasure(s, g)
    return MetricResult(mae(s, g), best, curve)
