"""Timing comparison of the compiled and pure-numpy message kernels.

Usage: python benchmarks/bench_backends.py [--size 64] [--sweeps 50]

Builds the same flat and sharded graphs on a procedural scene pair and times
full sweeps under each backend, reporting ms/sweep and the speedup.  The
first compiled sweep is excluded from timing (jit warmup).
"""

import argparse
import time

import numpy as np

from pixelgbp import backend
from pixelgbp.datagen import make_scene_pair, procedural_panorama
from pixelgbp.experiment import FLAT_PARAMS, SHARDED_PARAMS
from pixelgbp.factors import FactorParams
from pixelgbp.imaging import intrinsics_from_fov
from pixelgbp.topology import build_flat, build_sharded


def time_sweeps(kind, size, pair, sweeps, which):
    backend.set_backend(which)
    params = FactorParams(**(FLAT_PARAMS if kind == "flat" else SHARDED_PARAMS))
    builder = build_flat if kind == "flat" else build_sharded
    graph = builder(size, size, params)
    graph.set_scene(pair.left, pair.right, pair.K)
    graph.sweep()  # warmup: jit compilation, caches
    start = time.perf_counter()
    for _ in range(sweeps):
        graph.sweep()
    elapsed = (time.perf_counter() - start) / sweeps * 1000.0
    backend.set_backend(None)
    return elapsed, graph


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--sweeps", type=int, default=50)
    args = ap.parse_args()

    pano = procedural_panorama(seed=0)
    K = intrinsics_from_fov(60.0, args.size, args.size)
    pair = make_scene_pair(pano, K, args.size, args.size, 1.0, 0.0, 0)

    backends = ["numpy"]
    if backend.numba_available():
        backends.append("numba")
    else:
        print("numba not importable; timing numpy only")

    for kind in ("flat", "sharded"):
        times = {}
        frames = {}
        for which in backends:
            ms, graph = time_sweeps(kind, args.size, pair, args.sweeps, which)
            times[which] = ms
            frames[which] = graph.frames.copy()
        line = f"{kind:8s} {args.size}x{args.size}: " + "  ".join(
            f"{which}={times[which]:8.3f} ms/sweep" for which in backends)
        if len(backends) == 2:
            line += f"  speedup={times['numpy'] / times['numba']:.1f}x"
            drift = np.abs(frames["numpy"] - frames["numba"]).max()
            line += f"  max frame diff={drift:.2e}"
        print(line)


if __name__ == "__main__":
    main()
