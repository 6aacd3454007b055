"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--trials N] [--side N]

Both backends are called directly in one process; numba timings exclude
compilation (a warm-up call runs first).
"""

import argparse
import math
import time

import numpy as np

from fresco import _accel, _kernels
from fresco.prop1 import trial_seeds


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=1000, help="noise field is side x side x 1")
    ap.add_argument("--trials", type=int, default=100_000, help="re-noise Monte Carlo trials at d=1024")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    seed = np.uint64(12345)
    field_np = lambda: _kernels.field_block_np(seed, 0, 0, args.side, args.side, 1)
    field_nb = lambda: _kernels._field_block_nb(seed, 0, 0, args.side, args.side, 1)
    _kernels._field_block_nb(seed, 0, 0, 2, 2, 1)
    assert np.allclose(field_np(), field_nb(), rtol=0, atol=1e-12)

    d = 1024
    coeffs = (0.4, 0.5, 5 / 6, 1 / 6, math.sqrt(0.25 - 25 / 36 * 0.16))
    seeds = trial_seeds(0, args.trials, d)
    mc = lambda use: _kernels.transition_errors(seeds, d, *coeffs, use_numba=use)
    _kernels.transition_errors(seeds[:4], 8, *coeffs, use_numba=True)

    rows = [
        (f"noise field {args.side}x{args.side}", best_of(field_np, args.repeats), best_of(field_nb, args.repeats)),
        (f"re-noise MC d={d} trials={args.trials}", best_of(lambda: mc(False), 1), best_of(lambda: mc(True), 1)),
    ]
    print(f"{'kernel':<40} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<40} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
