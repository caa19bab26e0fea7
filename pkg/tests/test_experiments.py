import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbmdrift.experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    ReportRow,
    default_config,
    fou_derivative_error,
    fou_stationary_second_moment,
    report,
    run_experiment,
    verdicts,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(
    st.sampled_from(EXPERIMENTS),
    st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4),
    finite,
    st.integers(0, 2**31),
    st.lists(st.sampled_from(["linear", "cubic", "coupled2d"]), min_size=1, max_size=3),
)
def test_config_text_round_trip(exp, hs, x0, seed, models):
    cfg = default_config(exp).replace(hs=tuple(hs), x0=x0, seed=seed, models=tuple(models))
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.config_hash == cfg.config_hash


def test_hash_ignores_execution_keys_only():
    cfg = default_config("decay")
    assert cfg.replace(workers=8, out_dir="x").config_hash == cfg.config_hash
    assert cfg.replace(seed=1).config_hash != cfg.config_hash


def test_partial_config_uses_experiment_defaults():
    cfg = ExperimentConfig.from_text("experiment = moments  # comment\nn_reps = 7\n")
    assert cfg.n_reps == 7 and cfg.horizons == default_config("moments").horizons


@pytest.mark.parametrize(
    "text",
    [
        "n_reps = 3",
        "experiment = decay\nbogus = 1",
        "experiment = decay\nseed = 1\nseed = 2",
        "experiment = decay\nseed = one",
        "experiment = decay\nmodels = quartic",
        "experiment = decay\ng = cube",
        "experiment = nothing",
        "experiment = decay\njust words",
    ],
)
def test_bad_configs_are_rejected(text):
    with pytest.raises((ConfigError, ValueError)):
        ExperimentConfig.from_text(text)


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_shipped_configs_parse(exp):
    for name in (f"{exp}.conf", f"{exp}_quick.conf"):
        cfg = ExperimentConfig.from_file(CONFIGS / name)
        assert cfg.experiment == exp
    assert ExperimentConfig.from_file(CONFIGS / f"{exp}.conf") == default_config(exp)


def test_verdict_aggregation():
    rows = [
        ReportRow("e", "C1", {}, "a", 1.0, verdict=True),
        ReportRow("e", "C1", {}, "b", 2.0, verdict=False),
        ReportRow("e", "C2", {}, "c", 3.0),
    ]
    v = verdicts(rows)
    assert v == {"C1": {"pass": False, "checks": 2, "failures": [{"statistic": "b", "params": {}, "value": 2.0}]}}


def test_fou_reference_values():
    # H = 1/2: the stationary variance sigma^2 / (2 theta)
    assert fou_stationary_second_moment(0.5, 1.0, 1.0) == pytest.approx(0.5)
    assert fou_stationary_second_moment(0.5, 2.0, 3.0) == pytest.approx(9 / 4)
    assert fou_derivative_error(1e-3) < fou_derivative_error(2e-3)


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_quick_campaign_is_byte_identical(exp, tmp_path):
    cfg = ExperimentConfig.from_file(CONFIGS / f"{exp}_quick.conf")
    outs = []
    for k, workers in enumerate((1, 2)):
        rows, data = run_experiment(cfg.replace(workers=workers))
        outs.append(report(cfg, rows, data, out_dir=tmp_path / str(k), elapsed=0.1 * k))
    a, b = outs
    for key in ("data", "rows", "summary", "verdicts"):
        assert Path(a["paths"][key]).read_bytes() == Path(b["paths"][key]).read_bytes(), key
    meta = json.loads(Path(a["paths"]["metadata"]).read_text())
    assert "timestamp" in meta
    summary = json.loads(Path(a["paths"]["summary"]).read_text())
    assert summary["config_hash"] == cfg.config_hash and "workers" not in summary["config"]
    assert a["verdicts"], "every campaign must emit at least one verdict"


def test_report_rows_format_floats_exactly(tmp_path):
    row = ReportRow("x", "C1", {"H": np.float64(0.35)}, "s", 0.1 + 0.2, stderr=None, verdict=np.bool_(True))
    cells = row.as_list()
    assert float(cells[4]) == 0.1 + 0.2 and cells[5] == "" and cells[6] == "pass"
    assert json.loads(cells[2]) == {"H": 0.35}
