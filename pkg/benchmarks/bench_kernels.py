"""Compare the compiled fast-chain kernel against the pure-Python fallback.

Runs the same linearly-implicit polynomial chain through both backends,
checks bitwise agreement of every recorded state and the end state, and
reports wall time per backend.  Usage:

    python3 benchmarks/bench_kernels.py [--steps N] [--chains N] [--repeat N]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from msde import kernels


def run_backend(name: str, chains: int, steps: int, stride: int):
    kernels.set_backend(name)
    rng = np.random.Generator(np.random.Philox(key=[7, 0], counter=[0, 0, 0, 0]))
    z = rng.standard_normal((chains, steps))
    coeffs = np.array([0.0, -0.5, 0.0, -1.0])
    n_rec = steps // stride
    out = np.empty(n_rec)
    recorded = np.empty((chains, n_rec))
    ends = np.empty(chains)
    t0 = time.perf_counter()
    for c in range(chains):
        y_end, _, n_out = kernels.chain_poly(
            0.1, coeffs, 2.0, 1.0, 1e-3, 1.0, z[c], stride, stride, out
        )
        if n_out != n_rec:
            raise RuntimeError(f"expected {n_rec} records, got {n_out}")
        recorded[c] = out
        ends[c] = y_end
    return time.perf_counter() - t0, recorded, ends


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--chains", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = kernels.available_backends()
    print(f"backends: {', '.join(names)}")
    if len(names) < 2:
        print("only one backend available; timing it alone, no parity check")

    stride = 100
    results = {}
    for name in names:
        best = float("inf")
        for _ in range(args.repeat):
            seconds, rec, ends = run_backend(name, args.chains, args.steps, stride)
            best = min(best, seconds)
        results[name] = (best, rec, ends)
        steps_per_s = args.chains * args.steps / best
        print(f"{name:10s} best of {args.repeat}: {best * 1e3:8.2f} ms  "
              f"({steps_per_s / 1e6:.1f}M steps/s)")

    if len(names) == 2:
        (_, rec_a, end_a), (_, rec_b, end_b) = (results[n] for n in names)
        same = np.array_equal(rec_a, rec_b) and np.array_equal(end_a, end_b)
        print(f"bitwise parity: {'OK' if same else 'MISMATCH'}")
        if not same:
            return 1
        fast, slow = sorted(results[n][0] for n in names)
        print(f"speedup: {slow / fast:.1f}x")
    kernels.set_backend(names[0])
    return 0


if __name__ == "__main__":
    sys.exit(main())
