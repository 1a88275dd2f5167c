"""Time the compiled and pure-Python kernel backends side by side.

Reports per-kernel timings on representative network shapes and the
end-to-end forward latency at 256x256, batch 1, single thread.

    python3 benchmarks/compare_backends.py [--runs N] [--json]
"""
from __future__ import annotations

import argparse
import json
import statistics
import time

import numpy as np

from dfmnet import kernels
from dfmnet.model import DFMNet, ModelConfig, build_manifest
from dfmnet.nn import ConvParams, bilinear_resize, conv2d, maxpool2
from dfmnet.weights import init_random


def timed(fn, runs: int, warmup: int = 2) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times) * 1e3


def cases(rng):
    x96 = rng.standard_normal((1, 96, 128, 128)).astype(np.float32)
    dw = ConvParams.create(rng.standard_normal((96, 1, 3, 3)), None, 1, 1, 1, 96)
    dw_s2 = ConvParams.create(rng.standard_normal((96, 1, 3, 3)), None, 2, 1, 1, 96)
    x16 = rng.standard_normal((1, 16, 128, 128)).astype(np.float32)
    dil = ConvParams.create(rng.standard_normal((16, 16, 3, 3)), None, 1, 2, 2)
    small = rng.standard_normal((1, 16, 16, 16)).astype(np.float32)
    return {
        "depthwise 3x3 96ch 128^2": lambda: conv2d(x96, dw),
        "depthwise 3x3 s2 96ch 128^2": lambda: conv2d(x96, dw_s2),
        "dilated 3x3 16->16 128^2": lambda: conv2d(x16, dil),
        "maxpool2 96ch 128^2": lambda: maxpool2(x96),
        "bilinear 16^2 -> 256^2": lambda: bilinear_resize(small, 256, 256),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args(argv)

    kernels.set_num_threads(1)
    rng = np.random.default_rng(0)
    work = cases(rng)
    net = DFMNet(init_random(build_manifest(ModelConfig()), 0))
    rgb = rng.standard_normal((1, 3, 256, 256)).astype(np.float32)
    depth = rng.standard_normal((1, 1, 256, 256)).astype(np.float32)
    work["forward 256^2"] = lambda: net.forward(rgb, depth)

    names = kernels.available_backends()
    table = {}
    for backend in names:
        kernels.set_backend(backend)
        table[backend] = {k: timed(fn, args.runs) for k, fn in work.items()}
    kernels.set_backend("auto")

    if args.json:
        print(json.dumps({"runs": args.runs, "median_ms": table}, indent=2))
        return 0
    width = max(map(len, work))
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>10}" for b in names)
          + ("     speedup" if len(names) == 2 else ""))
    for k in work:
        row = [table[b][k] for b in names]
        line = f"{k:<{width}}  " + "  ".join(f"{v:>8.2f}ms" for v in row)
        if len(names) == 2:
            line += f"  {table['python'][k] / table['compiled'][k]:>9.1f}x"
        print(line)
    if len(names) == 1:
        print("compiled backend not built; only the python fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
