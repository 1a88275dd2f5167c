"""DFMW weight files and deterministic seeded initialization.

File layout (little-endian, no padding)::

    b"DFMW" | version u32 (=1) | entry_count u32
    per entry: name_len u16 | name (UTF-8) | ndim u8 | dims u32 * ndim
               | dtype u8 (0 = float32) | payload float32 * prod(dims)
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, Mapping, Optional, Tuple

import numpy as np

MAGIC = b"DFMW"
VERSION = 1
DTYPE_F32 = 0

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class WeightFormatError(Exception):
    """Base class for weight-file problems."""


class BadMagicError(WeightFormatError):
    pass


class VersionMismatchError(WeightFormatError):
    pass


class ShapeMismatchError(WeightFormatError):
    pass


class ManifestMismatchError(WeightFormatError):
    """Missing or unexpected entries."""


class TruncatedPayloadError(WeightFormatError):
    pass


class NonFiniteWeightError(WeightFormatError):
    def __init__(self, name: str, index: int):
        super().__init__(f"entry {name!r} has a non-finite value at flat index {index}")
        self.name = name
        self.index = index


class UnsupportedDtypeError(WeightFormatError):
    pass


Manifest = Dict[str, Tuple[int, ...]]


@dataclass
class ModelWeights:
    """Ordered name -> array map validated against a manifest."""

    entries: Dict[str, np.ndarray]
    manifest: Manifest = field(default_factory=dict)

    def __post_init__(self):
        if self.manifest:
            validate(self.entries, self.manifest)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()

    def param_count(self) -> int:
        return sum(int(a.size) for a in self.entries.values())

    def replace(self, updates: Mapping[str, np.ndarray]) -> "ModelWeights":
        """Copy with some entries swapped."""
        entries = dict(self.entries)
        entries.update({k: np.asarray(v, dtype=np.float32) for k, v in updates.items()})
        return ModelWeights(entries, dict(self.manifest))


def validate(entries: Mapping[str, np.ndarray], manifest: Manifest) -> None:
    missing = [k for k in manifest if k not in entries]
    extra = [k for k in entries if k not in manifest]
    if missing or extra:
        raise ManifestMismatchError(f"missing entries {missing[:5]}, unexpected entries {extra[:5]}")
    for name, shape in manifest.items():
        arr = entries[name]
        if tuple(arr.shape) != tuple(shape):
            raise ShapeMismatchError(f"entry {name!r} has shape {tuple(arr.shape)}, expected {tuple(shape)}")
        _check_finite(name, arr)


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFiniteWeightError(name, int(np.flatnonzero(bad.ravel())[0]))


def encoded_size(manifest: Manifest) -> int:
    size = 4 + 4 + 4
    for name, shape in manifest.items():
        size += 2 + len(name.encode("utf-8")) + 1 + 4 * len(shape) + 1 + 4 * math.prod(shape)
    return size


def save(w: ModelWeights, sink: BinaryIO) -> int:
    """Write ``w`` in DFMW format; returns the number of bytes written."""
    names = list(w.manifest) if w.manifest else list(w.entries)
    written = sink.write(MAGIC + struct.pack("<II", VERSION, len(names)))
    for name in names:
        arr = np.ascontiguousarray(w.entries[name], dtype="<f4")
        raw = name.encode("utf-8")
        header = struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape) + struct.pack("<B", DTYPE_F32)
        written += sink.write(header)
        written += sink.write(arr.tobytes())
    return written


def save_file(w: ModelWeights, path) -> int:
    with open(path, "wb") as f:
        return save(w, f)


def to_bytes(w: ModelWeights) -> bytes:
    buf = io.BytesIO()
    save(w, buf)
    return buf.getvalue()


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedPayloadError(f"truncated while reading {what}: wanted {n} bytes, got {len(data)}")
    return data


def load(source: BinaryIO, manifest: Optional[Manifest] = None) -> ModelWeights:
    """Read a DFMW payload; when ``manifest`` is given the result is validated against it."""
    head = source.read(4)
    if head != MAGIC:
        raise BadMagicError(f"bad magic {head!r}, expected {MAGIC!r}")
    version, count = struct.unpack("<II", _read_exact(source, 8, "header"))
    if version != VERSION:
        raise VersionMismatchError(f"unsupported DFMW version {version}, expected {VERSION}")
    entries: Dict[str, np.ndarray] = {}
    for k in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(source, 2, f"entry #{k} name length"))
        name = _read_exact(source, name_len, f"entry #{k} name").decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(source, 1, f"entry {name!r} rank"))
        dims = struct.unpack(f"<{ndim}I", _read_exact(source, 4 * ndim, f"entry {name!r} dims"))
        (dtype,) = struct.unpack("<B", _read_exact(source, 1, f"entry {name!r} dtype"))
        if dtype != DTYPE_F32:
            raise UnsupportedDtypeError(f"entry {name!r} has dtype code {dtype}; only 0 (float32) is supported")
        if manifest is not None and name in manifest and tuple(dims) != tuple(manifest[name]):
            raise ShapeMismatchError(f"entry {name!r} has shape {tuple(dims)}, expected {tuple(manifest[name])}")
        n = math.prod(dims)
        raw = source.read(4 * n)
        if len(raw) != 4 * n:
            raise TruncatedPayloadError(
                f"entry {name!r} truncated: payload needs {4 * n} bytes, found {len(raw)}")
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
        _check_finite(name, arr)
        entries[name] = arr
    if manifest is not None:
        validate(entries, manifest)
        return ModelWeights(entries, dict(manifest))
    return ModelWeights(entries, {k: tuple(v.shape) for k, v in entries.items()})


def load_file(path, manifest: Optional[Manifest] = None) -> ModelWeights:
    with open(path, "rb") as f:
        return load(f, manifest)


def from_bytes(data: bytes, manifest: Optional[Manifest] = None) -> ModelWeights:
    return load(io.BytesIO(data), manifest)


# --- seeded initialization -------------------------------------------------

def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int, count: int) -> np.ndarray:
    """The first ``count`` outputs of splitmix64 started from ``state``."""
    with np.errstate(over="ignore"):
        z = np.uint64(state & _MASK64) + np.arange(1, count + 1, dtype=np.uint64) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def uniform_from_bits(bits: np.ndarray, bound: float) -> np.ndarray:
    """Top 24 bits -> u in [0, 1) -> (2u - 1) * bound, rounded once to float32."""
    u = (bits >> np.uint64(40)).astype(np.float64) / float(1 << 24)
    return ((2.0 * u - 1.0) * bound).astype(np.float32)


def fan_in(shape: Tuple[int, ...]) -> int:
    return int(math.prod(shape[1:]))


def init_value(name: str, shape: Tuple[int, ...], seed: int) -> np.ndarray:
    n = math.prod(shape)
    if name.endswith(".bn.gamma") or name.endswith(".bn.var"):
        return np.ones(shape, dtype=np.float32)
    if name.endswith(".weight"):
        state = (seed & _MASK64) ^ fnv1a64(name.encode("utf-8"))
        bound = math.sqrt(1.0 / fan_in(shape))
        return uniform_from_bits(splitmix64(state, n), bound).reshape(shape)
    return np.zeros(shape, dtype=np.float32)


def init_random(manifest: Manifest, seed: int) -> ModelWeights:
    """Uniform(+-sqrt(1/fan_in)) weights, zero biases, identity batch norm."""
    entries = {name: init_value(name, tuple(shape), seed) for name, shape in manifest.items()}
    return ModelWeights(entries, dict(manifest))
