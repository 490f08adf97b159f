"""Compare the compiled orbit kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--steps N] [--orbits M] [--repeat R]

Both backends must produce identical states; the script checks that before
timing anything.
"""
import argparse
import time

import numpy as np

from stochstab import build_system, kernels
from stochstab.noise import NoiseKernel, sample_points


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--orbits", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--systems", default="doubling,fig1,fig2,viana,torus")
    args = ap.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        print("compiled backend not available; only the fallback can run")
        return 1
    print(f"{'system':10s} {'steps':>10s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name in args.systems.split(","):
        system = build_system(name)
        kern = NoiseKernel.for_system(system, "additive", 0.01)
        x0 = sample_points(system.domain, args.orbits, 7, 0)
        if name == "fig2":
            lo, hi = system.trapping_intervals[1]
            x0 = np.linspace(lo, hi, args.orbits + 2)[1:-1, None]
        T = np.stack([kern.embed(kern.draw(7, i, 0, args.steps)) for i in range(args.orbits)])
        a = kernels.iterate(system, x0, T, backend="cython")
        b = kernels.iterate(system, x0, T, backend="python")
        if not np.array_equal(a, b):
            raise SystemExit(f"{name}: backends disagree")
        tc = _time(lambda: kernels.iterate(system, x0, T, backend="cython"), args.repeat)
        tp = _time(lambda: kernels.iterate(system, x0, T, backend="python"), args.repeat)
        print(f"{name:10s} {args.steps * args.orbits:10d} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
