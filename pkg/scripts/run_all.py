"""Run every campaign from its config file and print one verdict line per criterion.

    python scripts/run_all.py [--configs configs] [--out-dir results] [--workers N] [--quick]
"""

import argparse
import sys
import time
from pathlib import Path

from fbmdrift.experiments import EXPERIMENTS, ExperimentConfig, report, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", default=str(Path(__file__).resolve().parents[1] / "configs"))
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quick", action="store_true", help="use the *_quick.conf variants")
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS, default=EXPERIMENTS)
    args = ap.parse_args()

    ok = True
    for name in args.only:
        path = Path(args.configs) / (f"{name}_quick.conf" if args.quick else f"{name}.conf")
        cfg = ExperimentConfig.from_file(path).replace(workers=args.workers, out_dir=args.out_dir)
        t0 = time.perf_counter()
        rows, data = run_experiment(cfg)
        elapsed = time.perf_counter() - t0
        out = report(cfg, rows, data, elapsed=elapsed)
        for crit, v in sorted(out["verdicts"].items()):
            print(f"{name:12s} {crit:4s} {'PASS' if v['pass'] else 'FAIL'}  ({v['checks']} checks, {elapsed:.1f}s)")
        ok &= out["all_pass"]
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
