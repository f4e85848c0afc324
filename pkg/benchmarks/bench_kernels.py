"""Time the flow grid kernels: numba against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 16 32 48] [--repeat 5]
"""

import argparse
import time

import numpy as np

from pseudoym import kernels


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    h = np.full(3, 2.0 / (n - 1))
    a = rng.standard_normal((3, n, n, n))
    E = rng.standard_normal((2, 3, n, n, n))
    return a, h, E


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def pipeline_np(a, h, E):
    F = kernels.field_strength_np(a, h)
    _, B = kernels.horizontal_bivector_np(F, E)
    return kernels.divergence_np(B, h)


def pipeline_nb(a, h, E):
    F = kernels.field_strength_nb(a, h)
    _, B = kernels.horizontal_bivector_nb(F, E)
    return kernels.divergence_nb(B, h)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 48])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    have_nb = kernels.numba is not None
    print(f"{'grid':>6} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        a, h, E = _inputs(n)
        t_np = _best(lambda: pipeline_np(a, h, E), args.repeat)
        if have_nb:
            pipeline_nb(a, h, E)  # compile
            t_nb = _best(lambda: pipeline_nb(a, h, E), args.repeat)
            diff = float(np.max(np.abs(pipeline_nb(a, h, E) - pipeline_np(a, h, E))))
            print(f"{n:>4}^3 {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f} {diff:10.1e}")
        else:
            print(f"{n:>4}^3 {1e3 * t_np:10.2f} {'-':>10} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
