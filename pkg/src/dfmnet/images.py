"""Image loading, normalization and saliency-map output."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .nn import bilinear_resize
from .tensor import ShapeError, Tensor

INPUT_SIZE = 256
RGB_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
RGB_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)
DEPTH_MEAN = np.float32(0.5)
DEPTH_STD = np.float32(0.5)


class ImageReadError(OSError):
    pass


@dataclass
class ImagePair:
    rgb: Tensor     # (1, 3, 256, 256), normalized
    depth: Tensor   # (1, 1, 256, 256), normalized
    rgb_path: str = ""
    depth_path: str = ""


def _read(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc
    if arr.size == 0:
        raise ImageReadError(f"image {path} is empty")
    if arr.dtype == np.uint16 or arr.dtype == np.int32:
        # 16-bit depth payloads are reduced to 8 bits
        arr = (arr.astype(np.uint32) >> 8).astype(np.uint8)
    elif arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    return arr


def read_rgb(path) -> np.ndarray:
    """HxWx3 uint8."""
    arr = _read(path)
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"{path}: expected a 3-channel RGB image, got array shape {arr.shape}")
    return arr


def read_gray(path) -> np.ndarray:
    """HxW uint8."""
    arr = _read(path)
    if arr.ndim == 3 and arr.shape[2] == 2:
        arr = arr[:, :, 0]  # gray + alpha
    if arr.ndim != 2:
        raise ShapeError(f"{path}: expected a single-channel depth image, got array shape {arr.shape}")
    return arr


def _to_unit_tensor(arr: np.ndarray) -> Tensor:
    t = arr.astype(np.float32) / np.float32(255.0)
    if t.ndim == 2:
        return t[None, None]
    return np.ascontiguousarray(t.transpose(2, 0, 1)[None])


def normalize_rgb(unit: Tensor) -> Tensor:
    return ((unit - RGB_MEAN[None, :, None, None]) / RGB_STD[None, :, None, None]).astype(np.float32)


def denormalize_rgb(t: Tensor) -> Tensor:
    return (t * RGB_STD[None, :, None, None] + RGB_MEAN[None, :, None, None]).astype(np.float32)


def normalize_depth(unit: Tensor) -> Tensor:
    return ((unit - DEPTH_MEAN) / DEPTH_STD).astype(np.float32)


def denormalize_depth(t: Tensor) -> Tensor:
    return (t * DEPTH_STD + DEPTH_MEAN).astype(np.float32)


def prepare_rgb(arr: np.ndarray, size: int = INPUT_SIZE) -> Tensor:
    """uint8 HxWx3 -> normalized (1, 3, size, size). Non-square inputs are warped."""
    return normalize_rgb(bilinear_resize(_to_unit_tensor(arr), size, size))


def prepare_depth(arr: np.ndarray, size: int = INPUT_SIZE, invert: bool = False) -> Tensor:
    unit = bilinear_resize(_to_unit_tensor(arr), size, size)
    if invert:
        unit = np.float32(1.0) - unit
    return normalize_depth(unit)


def load_pair(rgb_path, depth_path, invert_depth: bool = False, size: int = INPUT_SIZE) -> ImagePair:
    rgb = prepare_rgb(read_rgb(rgb_path), size)
    depth = prepare_depth(read_gray(depth_path), size, invert_depth)
    return ImagePair(rgb, depth, str(rgb_path), str(depth_path))


def map_to_uint8(m: Tensor) -> np.ndarray:
    """(1, 1, h, w) map in [0, 1] -> HxW uint8, rounding half to even."""
    m = np.asarray(m)
    if m.ndim == 4:
        if m.shape[:2] != (1, 1):
            raise ShapeError(f"expected a (1, 1, h, w) map, got {m.shape}")
        m = m[0, 0]
    if m.ndim != 2:
        raise ShapeError(f"expected a single-channel map, got {m.shape}")
    if not np.isfinite(m).all() or m.min() < 0 or m.max() > 1:
        raise ValueError("map entries must lie in [0, 1]")
    return np.rint(m.astype(np.float64) * 255.0).astype(np.uint8)


def save_map(m: Tensor, path) -> None:
    Image.fromarray(map_to_uint8(m)).save(Path(path))


def save_rgb(arr: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(Path(path))


def save_gray(arr: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(Path(path))


def pair_from_arrays(rgb: np.ndarray, depth: np.ndarray, invert_depth: bool = False,
                     size: int = INPUT_SIZE) -> ImagePair:
    """Build an :class:`ImagePair` from in-memory uint8 arrays."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"expected HxWx3 RGB array, got {rgb.shape}")
    if depth.ndim != 2:
        raise ShapeError(f"expected HxW depth array, got {depth.shape}")
    return ImagePair(prepare_rgb(rgb, size), prepare_depth(depth, size, invert_depth))
