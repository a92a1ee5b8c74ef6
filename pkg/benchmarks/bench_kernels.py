"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from driftwatch import _pykernels

try:
    from driftwatch import _ckernels
except ImportError:
    _ckernels = None


def _cases(rng: np.random.Generator):
    scores = rng.random(1_000_000)
    p = rng.dirichlet(np.ones(10), size=10_000)
    q = rng.dirichlet(np.ones(10), size=10_000)

    def binning(mod):
        def run():
            counts = np.zeros(10, dtype=np.int64)
            mod.bin_counts(scores, 0.0, 1.0, counts)
        return run

    def pairwise(fn_name):
        def make(mod):
            fn = getattr(mod, fn_name)
            rows = [(np.ascontiguousarray(a), np.ascontiguousarray(b)) for a, b in zip(p[:2000], q[:2000])]

            def run():
                for a, b in rows:
                    fn(a, b)
            return run
        return make

    def rows(mod):
        out = np.empty(len(p))

        def run():
            mod.js_rows(p, q, out)
        return run

    return [
        ("bin_counts, 1e6 scores", binning),
        ("kl_bits, 2000 calls", pairwise("kl_bits")),
        ("js_bits, 2000 calls", pairwise("js_bits")),
        ("js_rows, 10000 rows", rows),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not built; reinstall with Cython available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, make in _cases(rng):
        py = min(timeit.repeat(make(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<26}{py:>12.2f}{'n/a':>12}{'n/a':>10}")
            continue
        cy = min(timeit.repeat(make(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
