"""Benchmark the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--full]

The default sizes finish in a few seconds; --full runs a production-size
frame pair (800x464, the padded annotation-tool resolution) through the
block-matching search as well.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vimp.kernels import _ref

try:
    from vimp.kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, *args, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench(name, ref_fn, fast_fn, args, repeat=3, check=None):
    t_ref, out_ref = timeit(ref_fn, *args, repeat=repeat)
    if fast_fn is None:
        print(f"{name:<34} numpy {t_ref * 1e3:9.2f} ms   (compiled kernels not built)")
        return
    t_fast, out_fast = timeit(fast_fn, *args, repeat=repeat)
    status = ""
    if check is not None:
        status = "  results identical" if check(out_ref, out_fast) else "  MISMATCH!"
    print(f"{name:<34} numpy {t_ref * 1e3:9.2f} ms   cython {t_fast * 1e3:9.2f} ms"
          f"   speedup {t_ref / t_fast:6.1f}x{status}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true",
                        help="include a production-size flow search")
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    fast = _fast
    print(f"compiled backend available: {fast is not None}\n")

    a = rng.integers(0, 256, (128, 128), dtype=np.uint8)
    b = np.roll(a, (3, -5), axis=(0, 1))
    bench("sad_search 128x128 r=16", _ref.sad_search,
          fast.sad_search if fast else None, (a, b, 16, 16),
          check=lambda x, y: (x[0] == y[0]).all() and (x[1] == y[1]).all())

    coeffs = rng.normal(0, 150, (20_000, 64))
    steps = rng.uniform(0.7, 100, 20_000)
    bench("quant_cost 20k blocks", _ref.quant_cost,
          fast.quant_cost if fast else None, (coeffs, steps),
          check=lambda x, y: x == y)
    bench("quantize_blocks 20k blocks", _ref.quantize_blocks,
          fast.quantize_blocks if fast else None, (coeffs, steps),
          check=lambda x, y: (x == y).all())

    values = rng.normal(0, 60, (450, 800))
    dx = rng.normal(0, 4, (450, 800)).astype(np.float32)
    dy = rng.normal(0, 4, (450, 800)).astype(np.float32)
    bench("splat_forward 800x450", _ref.splat_forward,
          fast.splat_forward if fast else None, (values, dx, dy),
          check=lambda x, y: (x == y).all())

    if args.full:
        big_a = rng.integers(0, 256, (464, 800), dtype=np.uint8)
        big_b = np.roll(big_a, (2, 7), axis=(0, 1))
        bench("sad_search 800x464 r=24 (full)", _ref.sad_search,
              fast.sad_search if fast else None, (big_a, big_b, 16, 24),
              repeat=1,
              check=lambda x, y: (x[0] == y[0]).all() and (x[1] == y[1]).all())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
