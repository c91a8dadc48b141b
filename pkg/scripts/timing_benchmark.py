"""Registration wall-time versus marker count.

The triangle matcher's cost is dominated by the C(n,3) table build plus the
C(n,3) * k candidate verifications, so time grows steeply with n; ICP is
near-linear per iteration. This prints per-call timing for both.

Usage:
    python scripts/timing_benchmark.py --counts 3,5,8,10,12 --trials 30
"""

import argparse

import numpy as np

from fidreg.bench import SceneSpec, run_benchmark


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--counts", default="3,5,8,10,12")
    parser.add_argument("--trials", type=int, default=30, help="trials per cell")
    parser.add_argument("--sigma", type=float, default=1.0, help="noise sigma, mm")
    parser.add_argument("--seed", type=int, default=300, help="base seed")
    return parser.parse_args()


def main():
    args = parse_args()
    counts = [int(c) for c in args.counts.split(",")]
    grid = [
        SceneSpec(n_markers=n, noise_sigma_mm=args.sigma, seed=args.seed + 10 * n)
        for n in counts
    ]
    records = run_benchmark(grid, trials_per_cell=args.trials)

    print(f"{args.trials} trials per cell, noise sigma {args.sigma} mm")
    print(f"{'method':<10} {'markers':>7} {'mean ms':>9} {'p95 ms':>9} {'max ms':>9}")
    for method in ("triangle", "icp"):
        for n in counts:
            times = np.array(
                [
                    r.time_us / 1000.0
                    for r in records
                    if r.method == method and r.n_markers == n
                ]
            )
            print(
                f"{method:<10} {n:>7} {times.mean():>9.2f} "
                f"{np.percentile(times, 95):>9.2f} {times.max():>9.2f}"
            )


if __name__ == "__main__":
    main()
