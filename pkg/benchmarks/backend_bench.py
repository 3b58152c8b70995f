#!/usr/bin/env python3
"""Compare the numba kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/backend_bench.py``.  Each kernel is timed on
a construction-sized workload after a JIT warmup; the table reports the
median of five runs per backend and the speedup.  The same dispatch can
be forced package-wide by setting REDLAT_NO_NUMBA=1.
"""

import statistics
import time

import numpy as np

from redlat import kernels


def bench(fn, *args, repeats=5):
    fn(*args)  # warmup (JIT compile on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    rng = np.random.default_rng(7)
    rows = []

    # lattice state-vector workload: b=2, m=16, 120 active coordinates
    N = 2 ** 16
    tab = rng.standard_normal(N)
    effs = rng.integers(1, N, size=120).astype(np.int64) | 1
    gammas = 0.7 ** np.arange(1, 121)
    q = rng.standard_normal(N) + 2.0
    rows.append(
        (
            "korobov_product (N=2^16, s=120)",
            bench(kernels.korobov_product_np, tab, effs, gammas, 1.0),
            bench(kernels.korobov_product_nb, tab, effs, gammas, 1.0)
            if kernels.HAVE_NUMBA
            else None,
        )
    )
    rows.append(
        (
            "korobov_factor_apply (N=2^16)",
            bench(kernels.korobov_factor_apply_np, q, tab, 12345, 0.5, True),
            bench(kernels.korobov_factor_apply_nb, q, tab, 12345, 0.5, True)
            if kernels.HAVE_NUMBA
            else None,
        )
    )

    # polynomial scan workload: b=2, m=10, full candidate set at w=0
    b, m = 2, 10
    base = kernels.base_digit_table(b, m)
    Np = b ** m
    qd = rng.standard_normal(Np) + 2.0
    cands = np.arange(1, Np, 2, dtype=np.int64)
    cand_rows = np.zeros((cands.size, m), dtype=np.uint8)
    for i, e in enumerate(cands):
        ee = int(e)
        for j in range(m):
            cand_rows[i, j] = ee % b
            ee //= b
    phi = rng.standard_normal(m + 1)
    rows.append(
        (
            "poly_scan (b=2, m=10, 512 cands)",
            bench(kernels.poly_scan_np, qd, cand_rows, base, phi, b),
            bench(kernels.poly_scan_nb, qd, cand_rows, base, phi, b)
            if kernels.HAVE_NUMBA
            else None,
        )
    )
    g_row = cand_rows[17]
    rows.append(
        (
            "poly_mul_int (b=2, m=10)",
            bench(kernels.poly_mul_int_np, g_row, base, b),
            bench(kernels.poly_mul_int_nb, g_row, base, b)
            if kernels.HAVE_NUMBA
            else None,
        )
    )

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  speedup")
    for name, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  {'n/a':>10}")
        else:
            print(
                f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  {t_nb * 1e3:>8.3f}ms  "
                f"{t_np / t_nb:>6.1f}x"
            )
    if not kernels.HAVE_NUMBA:
        print("numba backend unavailable (REDLAT_NO_NUMBA set or numba missing)")


if __name__ == "__main__":
    main()
