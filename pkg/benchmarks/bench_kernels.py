"""Time the shell-integral kernel on both backends over a golden mesh.

    python3 benchmarks/bench_kernels.py [--resolution 0.05] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from plateau import corpus, kernels
from plateau.kernels import shell_integrals


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    c = corpus.t_cone(args.resolution)
    V, T = c.vertices, c.triangles
    print(f"t-cone h={args.resolution}: {len(T)} triangles, compiled backend: {kernels.BACKEND}")
    ref = {}
    for backend in ("python", "cython"):
        if backend == "cython" and kernels.BACKEND != "cython":
            print("cython   not built")
            continue
        for power in (0.0, -2.0):
            sec, out = best_of(lambda: shell_integrals(V, T, (0.0, 0.0, 0.0), 0.1, 0.9, power, backend=backend), args.repeat)
            drift = float(np.abs(out - ref.setdefault(power, out)).max())
            print(f"{backend:8s} power {power:+.0f}  {sec * 1e3:9.2f} ms  max diff vs python {drift:.1e}")


if __name__ == "__main__":
    main()
