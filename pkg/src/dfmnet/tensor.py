"""Rank-4 float32 tensors and the elementwise / reduction ops the network composes.

A tensor is a plain ``numpy.ndarray`` of dtype float32 and shape
``(n, c, h, w)``.  Operations never mutate their inputs.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

DTYPE = np.float32

Tensor = np.ndarray
Operand = Union[np.ndarray, float, int]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(ValueError):
    """A tensor holds NaN or infinite values."""


def as_tensor(data, shape: Sequence[int] | None = None) -> Tensor:
    """Convert ``data`` to a validated rank-4 float32 tensor."""
    t = np.asarray(data, dtype=DTYPE)
    if shape is not None:
        t = t.reshape(tuple(shape))
    if t.ndim != 4:
        raise ShapeError(f"expected rank-4 (n, c, h, w) tensor, got shape {t.shape}")
    check_finite(t)
    return t


def check_finite(t: np.ndarray, what: str = "tensor") -> None:
    if not np.isfinite(t).all():
        bad = int(np.flatnonzero(~np.isfinite(t.ravel()))[0])
        raise NonFiniteError(f"{what} has a non-finite value at flat index {bad}")


def _broadcast_operand(a: Tensor, b: Operand) -> np.ndarray:
    """Return ``b`` in a form numpy can broadcast against ``a``.

    Only the broadcast cases the fusion step needs are accepted: a scalar
    (per sample ``(m, 1, 1, 1)`` allowed), a per-channel vector
    ``(m, c, 1, 1)`` and a single-channel map ``(m, 1, h, w)``, where ``m``
    is 1 or the batch size of ``a``.
    """
    if np.isscalar(b):
        return np.asarray(b, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if b.shape == a.shape:
        return b
    if b.size == 1:
        return b.reshape(())
    if b.ndim == 4 and a.ndim == 4:
        n, c, h, w = a.shape
        bn, bc, bh, bw = b.shape
        if bn in (1, n):
            if bc in (1, c) and bh == 1 and bw == 1:
                return b
            if bc == 1 and bh == h and bw == w:
                return b
    raise ShapeError(f"cannot broadcast operand of shape {b.shape} onto {a.shape}")


def ewise_add(a: Tensor, b: Operand) -> Tensor:
    check_finite(a)
    bb = _broadcast_operand(a, b)
    check_finite(bb)
    return np.add(a, bb, dtype=DTYPE)


def ewise_mul(a: Tensor, b: Operand) -> Tensor:
    check_finite(a)
    bb = _broadcast_operand(a, b)
    check_finite(bb)
    return np.multiply(a, bb, dtype=DTYPE)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if len(parts) == 0:
        raise ShapeError("concat_channels needs at least one part")
    ref = parts[0].shape
    for p in parts:
        if p.ndim != 4 or p.shape[0] != ref[0] or p.shape[2:] != ref[2:]:
            raise ShapeError(
                f"part of shape {p.shape} does not match batch/spatial extent of {ref}"
            )
        check_finite(p)
    return np.concatenate(parts, axis=1).astype(DTYPE, copy=False)


def gap(t: Tensor) -> Tensor:
    """Global average pooling to ``(n, c, 1, 1)``.

    Sums are accumulated in float64 and rounded once.
    """
    if t.ndim != 4:
        raise ShapeError(f"expected rank-4 tensor, got shape {t.shape}")
    if t.shape[2] * t.shape[3] < 1:
        raise ShapeError("gap over an empty spatial extent")
    check_finite(t)
    return t.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(DTYPE)
