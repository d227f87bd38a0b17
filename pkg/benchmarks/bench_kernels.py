"""Benchmark the compiled kernels against the pure-NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--grid N] [--rank n]
"""

import argparse
import time

import numpy as np

from higgslab import kernels
from higgslab.kernels import _numpy as ref


def timeit(fn, reps=7):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=129)
    ap.add_argument("--rank", type=int, default=None, help="fiber dimension (default: 2 and 3)")
    args = ap.parse_args()

    impls = kernels.available_implementations()
    if "compiled" not in impls:
        print("compiled core not built; showing numpy only")
    ranks = (args.rank,) if args.rank else (2, 3)
    N = args.grid
    rng = np.random.default_rng(0)

    print(f"{'kernel':34s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for n in ranks:
        A = rng.standard_normal((N, N, n, n)) * 0.3 + 1j * rng.standard_normal((N, N, n, n)) * 0.3
        S = (A + A.conj().swapaxes(-1, -2)) / 2
        H, Hi = ref.expm_herm_pair(S)
        F = rng.standard_normal((N, N, n, n)) + 1j * rng.standard_normal((N, N, n, n))
        P = rng.standard_normal((4096, n, n)) + 1j * rng.standard_normal((4096, n, n))

        cases = [
            (f"expm_herm_pair   (N={N}, n={n})", lambda: kernels.expm_herm_pair(S)),
            (f"residual_m       (N={N}, n={n})", lambda: kernels.residual_m(H, Hi, F, 4.0, 0.02)),
            (f"ordered_product  (4096, n={n})", lambda: kernels.ordered_product(P)),
        ]
        for label, fn in cases:
            kernels.set_implementation("numpy")
            t_np = timeit(fn)
            if "compiled" in impls:
                kernels.set_implementation("compiled")
                t_c = timeit(fn)
                print(f"{label:34s} {t_np:8.2f}ms {t_c:8.2f}ms {t_np / t_c:7.1f}x")
            else:
                print(f"{label:34s} {t_np:8.2f}ms {'-':>10s} {'-':>8s}")
    if "compiled" in impls:
        kernels.set_implementation("compiled")


if __name__ == "__main__":
    main()
