"""Backend selection for the hot kernels.

The compiled Cython extension is used when it imports; otherwise the numpy
fallback is. Set ``DFMNET_BACKEND=python`` to force the fallback at import, or
call :func:`set_backend` at runtime.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active: ModuleType = _pykernels
_num_threads = 1


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> None:
    global _active
    if name == "auto":
        name = "compiled" if "compiled" in _BACKENDS else "python"
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}")
    _active = _BACKENDS[name]
    _active.set_num_threads(_num_threads)


def backend_name() -> str:
    return _active.NAME


def backend() -> ModuleType:
    return _active


def set_num_threads(n: int) -> None:
    """Intra-op thread count for compiled kernels and BLAS."""
    global _num_threads
    _num_threads = max(1, int(n))
    for mod in _BACKENDS.values():
        mod.set_num_threads(_num_threads)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(limits=_num_threads)


def num_threads() -> int:
    return _num_threads


set_backend(os.environ.get("DFMNET_BACKEND", "auto"))
