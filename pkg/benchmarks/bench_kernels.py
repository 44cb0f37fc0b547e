"""Benchmark the compiled stencil kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 50]

The same functions run under both backends (selected via the
RTSPECTRA_BACKEND environment flag); correctness of the pairing is asserted
before timing.
"""

import argparse
import os
import time

import numpy as np

from rtspectra import kernels


def set_backend(name: str) -> str:
    os.environ["RTSPECTRA_BACKEND"] = name
    kernels._BACKEND = None
    return kernels.backend()


def sample(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    comps = [rng.standard_normal((n + 1, n)),
             rng.standard_normal((n, n + 1))]
    comps[0][0, :] = comps[0][-1, :] = 0.0
    comps[1][:, 0] = comps[1][:, -1] = 0.0
    rho = rng.uniform(1.0, 2.0, (n, n))
    h = (1.0 / n, 1.0 / n)
    return comps, rho, h


def cases(n: int):
    comps, rho, h = sample(n)
    return {
        "divergence": lambda: kernels.divergence(comps, h),
        "gradient": lambda: kernels.gradient(rho, h),
        "laplacian": lambda: kernels.laplacian(comps, h),
        "donor_cell": lambda: kernels.donor_cell_update(rho, comps, h, 1e-3),
        "advect_u": lambda: kernels.advect_velocity_comp(comps, 0, h),
        "advect_w": lambda: kernels.advect_velocity_comp(comps, 1, h),
    }


def best_of(fn, repeat: int) -> float:
    fn()  # warm up (also triggers JIT compilation under numba)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    have_numba = set_backend("numba") == "numba"
    if not have_numba:
        print("numba unavailable; timing the numpy backend only")

    header = f"{'kernel':<12} {'n':>5} {'numpy':>12} {'numba':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        for name, fn in cases(n).items():
            set_backend("numpy")
            ref = fn()
            t_np = best_of(fn, args.repeat)
            if have_numba:
                set_backend("numba")
                out = fn()
                ref_arrs = ref if isinstance(ref, list) else [ref]
                out_arrs = out if isinstance(out, list) else [out]
                for a, b in zip(ref_arrs, out_arrs):
                    assert np.allclose(a, b, atol=1e-12), \
                        f"backend mismatch in {name} at n={n}"
                t_nb = best_of(fn, args.repeat)
                print(f"{name:<12} {n:>5} {t_np * 1e6:>10.1f}us "
                      f"{t_nb * 1e6:>10.1f}us {t_np / t_nb:>7.2f}x")
            else:
                print(f"{name:<12} {n:>5} {t_np * 1e6:>10.1f}us "
                      f"{'-':>12} {'-':>8}")
    set_backend("auto")


if __name__ == "__main__":
    main()
