"""Wall-clock of the most expensive consistency cell: cubic model, H=0.35, T=160 on n=2^15 steps.

    python scripts/time_longest_cell.py [--reps 100] [--workers 8]
"""

import argparse
import json
import os
import time

from fbmdrift.estimator import consistency_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--pivots", type=int, default=512)
    args = ap.parse_args()

    t0 = time.perf_counter()
    table = consistency_experiment(
        "cubic", theta=(1.0, 1.0), sigma=1.0, hs=(0.35,), horizons=(160.0,), n_reps=args.reps,
        seed=0, dt=10.0 / 2**11, n_pivots=args.pivots, workers=args.workers,
    )
    elapsed = time.perf_counter() - t0
    print(json.dumps({"reps": args.reps, "workers": args.workers, "cpus": os.cpu_count(),
                      "n_steps": 2**15, "seconds": round(elapsed, 2),
                      "median_abs_err_oracle": table.summary[0]["median_abs_err_oracle"]}))


if __name__ == "__main__":
    main()
