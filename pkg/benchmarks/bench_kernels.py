"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both versions run in this process; DELONE_LAB_JIT only decides which one the library uses.
"""
import argparse
import timeit

import numpy as np

from delone_lab import _kernels


def cases(rng):
    x = np.cumsum(rng.choice([1.618033988749895, 1.0], 20_000))
    w = rng.uniform(0, 1, x.size)
    alphas = rng.uniform(0, 1, 64)
    steps = rng.normal(0, 0.03, (1 << 14, 500))
    return {
        "phase_sums": (lambda: _kernels._phase_sums_np(x, w, alphas),
                       lambda: _kernels.phase_sums(x, w, alphas)),
        "stopped_walk": (lambda: _kernels._stopped_walk_np(0.05, steps, 0.3),
                         lambda: _kernels.stopped_walk(0.05, steps, 0.3)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"library backend: {_kernels.backend()}")
    for name, (ref, fast) in cases(np.random.default_rng(args.seed)).items():
        fast()  # compile outside the timed region
        t_ref = min(timeit.repeat(ref, number=1, repeat=args.repeat))
        t_fast = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        print(f"{name:14s} numpy {t_ref * 1e3:9.2f} ms   {_kernels.backend():6s} {t_fast * 1e3:9.2f} ms"
              f"   speedup {t_ref / t_fast:6.1f}x")


if __name__ == "__main__":
    main()
