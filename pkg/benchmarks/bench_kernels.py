"""Time the numba and numpy backends of the compiled kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are checked for agreement before timing. The first numba
call (JIT compilation, or loading the on-disk cache) is excluded. The
last rows time whole factor-path simulations, where the AR(1) recursion
dominates.
"""
import argparse
import time

import numpy as np

from tensorfactor import kernels
from tensorfactor.dgp import DgpSpec, gen_factor_series


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    for n, p in [(1_000, 1), (10_000, 1), (10_000, 16), (100_000, 2)]:
        innov = rng.standard_normal((n, p))
        yield f"ar1_filter n={n} p={p}", kernels.ar1_filter, (innov, np.full(p, 0.6), np.zeros(p))
    for T, ranks in [(1024, (1, 1)), (4096, (1, 2)), (32768, (2, 2))]:
        spec = DgpSpec(ranks, ranks, T, seed=1)
        yield f"gen_factor_series T={T} ranks={ranks}", lambda s: gen_factor_series(s).data, (spec,)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    prev = kernels.get_backend()
    print(f"{'case':42s} {'numpy (ms)':>11s} {'numba (ms)':>11s} {'speedup':>8s}")
    try:
        for name, fn, fargs in cases(rng):
            kernels.set_backend("numpy")
            ref = fn(*fargs)
            t_np = best_of(lambda: fn(*fargs), args.repeat)
            kernels.set_backend("numba")
            np.testing.assert_allclose(fn(*fargs), ref, rtol=1e-12, atol=1e-12)
            t_nb = best_of(lambda: fn(*fargs), args.repeat)
            print(f"{name:42s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f}")
    finally:
        kernels.set_backend(prev)


if __name__ == "__main__":
    main()
