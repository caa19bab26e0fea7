"""Run one campaign twice into separate directories and diff every report file byte for byte.

    python scripts/check_determinism.py configs/decay_quick.conf
"""

import sys
import tempfile
from pathlib import Path

from fbmdrift.experiments import ExperimentConfig, report, run_experiment


def run_into(cfg, out):
    rows, data = run_experiment(cfg)
    return report(cfg, rows, data, out_dir=out)["paths"]


def main(path):
    cfg = ExperimentConfig.from_file(path)
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        pa, pb = run_into(cfg, a), run_into(cfg, b)
        same = True
        for key in sorted(pa):
            if key == "metadata":
                continue
            eq = Path(pa[key]).read_bytes() == Path(pb[key]).read_bytes()
            same &= eq
            print(f"{Path(pa[key]).name:32s} {'identical' if eq else 'DIFFERENT'}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
