"""Compare the compiled and NumPy ECF kernels on the default grid.

    python3 benchmarks/bench_ecf.py [--samples 10000] [--nodes 4097] [--repeat 3]
"""
import argparse
import time

import numpy as np

from specdeconv import _ecf_py
from specdeconv.spectral import default_grid

try:
    from specdeconv import _ecf_ext
except ImportError:
    _ecf_ext = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--nodes", type=int, default=None, help="nonnegative nodes (default: whole half grid)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    grid = default_grid()
    k = args.nodes or grid.half + 1
    x = np.random.default_rng(args.seed).standard_normal(args.samples)

    t_py, (re_py, im_py) = best_of(lambda: _ecf_py.ecf_sums_uniform(x, grid.dt, k), args.repeat)
    print(f"samples={args.samples} nodes={k}")
    print(f"python    {t_py:9.4f} s")
    if _ecf_ext is None:
        print("compiled  not built (pip install -e . --no-build-isolation)")
        return
    t_c, (re_c, im_c) = best_of(lambda: _ecf_ext.ecf_sums_uniform(x, grid.dt, k), args.repeat)
    err = max(np.max(np.abs(re_c - re_py)), np.max(np.abs(im_c - im_py))) / args.samples
    print(f"compiled  {t_c:9.4f} s   speedup {t_py / t_c:6.1f}x   max |diff|/n {err:.2e}")


if __name__ == "__main__":
    main()
