"""Timing comparison of the numpy and numba kernel backends.

Run directly:

    python3 benchmarks/bench_kernels.py [--repeat 20]

Imports both backend modules explicitly, so the SPTSEG_BACKEND variable
does not matter here. Numba timings exclude the first (compilation) call.
"""

import argparse
import time

import numpy as np

from sptseg.kernels import numpy_impl

try:
    from sptseg.kernels import numba_impl
except ImportError:
    numba_impl = None


def _twiddles(g, sign):
    k = np.arange(g)
    ang = sign * 2.0 * np.pi * np.outer(k, k) / g
    return np.cos(ang), np.sin(ang)


def make_cases(rng):
    xr8 = rng.standard_normal((8, 16, 16, 32))
    xi8 = rng.standard_normal((8, 16, 16, 32))
    xr12 = rng.standard_normal((8, 12, 12, 32))
    xi12 = rng.standard_normal((8, 12, 12, 32))
    wr, wi = _twiddles(12, -1.0)
    maps = rng.standard_normal((16, 48, 48))
    truth = rng.integers(0, 8, size=200_000)
    pred = rng.integers(0, 8, size=200_000)
    return [
        ("fft2_radix2 (8,16,16,32)",
         lambda m: m.fft2_radix2(xr8, xi8, -1.0)),
        ("dft2_matrix (8,12,12,32)",
         lambda m: m.dft2_matrix(xr12, xi12, wr, wi)),
        ("box_filter (16,48,48) win=7",
         lambda m: m.box_filter(maps, 7)),
        ("confusion_matrix (200k, 8 cls)",
         lambda m: m.confusion_matrix(truth, pred, 8)),
    ]


def bench(fn, module, repeat):
    fn(module)   # warm up (and compile, for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(module)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    print(f"{'kernel':<32} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, fn in cases:
        t_np = bench(fn, numpy_impl, args.repeat)
        if numba_impl is None:
            print(f"{name:<32} {t_np * 1e3:>8.3f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_nb = bench(fn, numba_impl, args.repeat)
        print(f"{name:<32} {t_np * 1e3:>8.3f}ms {t_nb * 1e3:>8.3f}ms "
              f"{t_np / t_nb:>7.2f}x")
    if numba_impl is None:
        print("numba is not installed; only the numpy backend was timed")


if __name__ == "__main__":
    main()
