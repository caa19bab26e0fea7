import csv
import io
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from fbmdrift.cli import main
from fbmdrift.fbm import TimeGrid, sample_fbm

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sample_fbm_csv_is_exact(capsys):
    code, out, _ = run(capsys, "sample-fbm", "--h", "0.3", "--n", "16", "--dt", "0.125", "--d", "2", "--seed", "5")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "B1", "B2"]
    vals = np.array(rows[1:], dtype=float)
    ref = sample_fbm(TimeGrid(16, 0.125), 0.3, 2, 5)
    assert np.array_equal(vals[:, 1:], ref.values)  # %.17g round-trips doubles
    assert vals[-1, 0] == 2.0


def test_integrate_writes_file(capsys, tmp_path):
    target = tmp_path / "x.csv"
    code, _, _ = run(capsys, "integrate", "--model", "coupled2d", "--h", "0.7", "--n", "8", "--dt", "0.1",
                     "--x0", "1,-1", "--out", str(target))
    assert code == 0
    rows = list(csv.reader(target.open()))
    assert rows[0] == ["t", "X1", "X2"] and rows[1][1:] == ["1", "-1"] and len(rows) == 10


def test_skorohod_json(capsys):
    code, out, _ = run(capsys, "skorohod", "--h", "0.35", "--n", "64", "--dt", "0.05", "--g", "tanh",
                       "--window", "0.5,2.5", "--rule", "left")
    assert code == 0
    res = json.loads(out)
    assert res["metadata"]["window"] == [10, 50] and res["metadata"]["rule"] == "left"
    assert res["value"] == pytest.approx(res["pathwise_sum"] - res["correction"])


def test_estimate_json_lines(capsys):
    code, out, _ = run(capsys, "estimate", "--model", "cubic", "--theta", "1,0.5", "--h", "0.7", "--n", "256",
                       "--dt", "0.05", "--reps", "3", "--pivots", "32")
    assert code == 0
    lines = [json.loads(x) for x in out.strip().splitlines()]
    assert [x["rep"] for x in lines] == [0, 1, 2]
    assert lines[0]["theta_true"] == [1.0, 0.5] and len(lines[0]["theta_hat"]) == 2


def test_experiment_exit_code_and_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "decay", "--config", str(CONFIGS / "decay_quick.conf"),
                       "--out-dir", str(tmp_path))
    assert code == 0 and "C6: PASS" in out
    assert (tmp_path / "decay_verdicts.json").exists()


def test_experiment_config_mismatch(capsys):
    code, _, err = run(capsys, "experiment", "norms", "--config", str(CONFIGS / "decay_quick.conf"))
    assert code == 2 and "decay" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["sample-fbm", "--h", "1.5", "--n", "4", "--dt", "0.1"],
        ["integrate", "--model", "cubic", "--h", "0.5", "--n", "4", "--dt", "0.1", "--theta", "1,1,1"],
        ["skorohod", "--model", "coupled2d", "--g", "tanh", "--h", "0.5", "--n", "4", "--dt", "0.1"],
    ],
)
def test_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


@pytest.mark.skipif(shutil.which("fbmdrift") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["fbmdrift", "sample-fbm", "--h", "0.5", "--n", "2", "--dt", "1"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[0] == "t,B1"
