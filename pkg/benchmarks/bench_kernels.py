"""Time the hot kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--L 8] [--N 16]

Each kernel is run once to trigger JIT compilation, then timed with timeit;
the best of ``--repeat`` runs is reported in milliseconds.  The Weyl rows
compare the direct O(D^3) sum (numba, and a numpy loop) with the factored
matrix-product form that both backends use in the library.
"""

from __future__ import annotations

import argparse
import os
import timeit

import numpy as np

from twistframe import _kernels


def best_ms(fn, repeat: int) -> float:
    fn()
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def with_backend(flag: str, fn):
    def run():
        old = os.environ.get("TWISTFRAME_NUMBA")
        os.environ["TWISTFRAME_NUMBA"] = flag
        try:
            return fn()
        finally:
            if old is None:
                del os.environ["TWISTFRAME_NUMBA"]
            else:
                os.environ["TWISTFRAME_NUMBA"] = old
    return run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--L", type=int, default=8)
    ap.add_argument("--N", type=int, default=16)
    args = ap.parse_args()
    L, N = args.L, args.N
    D = 2 * L * N
    rng = np.random.default_rng(0)
    f = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    u = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))

    cases = {
        "twisted_shift": lambda: _kernels.twisted_shift(f, (2,), (-1,), L, N),
        "fiber_inner": lambda: _kernels.fiber_inner(u, f),
        "weyl_direct": lambda: _kernels.weyl_forward_direct(f[None], L, N),
    }
    print(f"grid D={D} (L={L}, N={N}), best of {args.repeat}")
    print(f"{'kernel':<16}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fn in cases.items():
        t_nb = best_ms(with_backend("1", fn), args.repeat)
        t_np = best_ms(with_backend("0", fn), max(3, args.repeat // 5) if name == "weyl_direct" else args.repeat)
        print(f"{name:<16}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>10.1f}")
    t_fact = best_ms(lambda: _kernels.weyl_forward(f[None], L, N), args.repeat)
    print(f"{'weyl_factored':<16}{t_fact:>12.3f}{'(both)':>12}")


if __name__ == "__main__":
    main()
