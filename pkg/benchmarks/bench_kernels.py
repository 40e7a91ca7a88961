"""Compiled vs numpy Rademacher sign-sum kernel.

Usage: python3 benchmarks/bench_kernels.py [--dims 8 64] [--n 8 12 16] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from anisopsido import _rademacher_py

try:
    from anisopsido import _rademacher_ext
except ImportError:  # extension not built
    _rademacher_ext = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 64])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 12, 16, 20])
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'N':>3} {'dim':>5} {'numpy [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'rel diff':>9}")
    for dim in args.dims:
        for n in args.n:
            Y = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
            Y = np.ascontiguousarray(Y)
            # l_2-valued L_p norm on the fiber: block = dim, inner q = 2
            t_py, v_py = _time(lambda: _rademacher_py.sign_sum(Y, args.p, 2.0, args.p, dim, 1.0), args.repeat)
            if _rademacher_ext is None:
                print(f"{n:>3} {dim:>5} {t_py:>11.4f} {'n/a':>13} {'':>8} {'':>9}")
                continue
            t_c, v_c = _time(lambda: _rademacher_ext.sign_sum(Y, args.p, 2.0, args.p, dim, 1.0), args.repeat)
            print(f"{n:>3} {dim:>5} {t_py:>11.4f} {t_c:>13.4f} {t_py / t_c:>8.1f} {abs(v_c / v_py - 1):>9.1e}")


if __name__ == "__main__":
    main()
