"""Tests for the experiment pipelines, their artifacts, and the CLI.

These use deliberately reduced problem sizes; the full benchmark-scale
runs live in test_acceptance.py.
"""

import csv
import json

import numpy as np
import pytest
import yaml

from nessolve.cli import build_parser, main
from nessolve.experiments import DEFAULTS, EXPERIMENTS, ExperimentConfig, \
    check_thresholds, run_experiment

SMALL = {
    "elliptic1d": {"n_modes": 128, "truncation": 1024},
    "semilinear2d": {"n_per_dim": 8, "truncation": 64, "max_iterations": 4},
    "norm_study": {"n_per_dim": 8, "truncation": 56, "measurement_grid": 33,
                   "s_values": [1.0, 2.0]},
    "heat": {"n_fem": 16, "dt": 2.0 ** -6, "refine": 2, "truncation": 64,
             "n_seeds": 1},
    "allen_cahn": {"n_fem": 16, "dt": 2.0 ** -6, "refine": 2,
                   "truncation": 64, "n_seeds": 1},
    "rate_study": {"n_modes": 32},
}


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("poisson3d", 0)
    with pytest.raises(ValueError):
        ExperimentConfig("elliptic1d", None)
    with pytest.raises(ValueError):
        ExperimentConfig("elliptic1d", 0, params={"n_modez": 4})
    cfg = ExperimentConfig("elliptic1d", 3, params={"n_modes": 16})
    p = cfg.resolved()
    assert p["n_modes"] == 16 and p["seed"] == 3
    assert p["truncation"] == DEFAULTS["elliptic1d"]["truncation"]


def test_elliptic_small_run_and_artifacts(tmp_path):
    out = tmp_path / "run"
    cfg = ExperimentConfig("elliptic1d", 7, out_dir=str(out),
                           params=SMALL["elliptic1d"])
    report = run_experiment(cfg)
    m = report["metrics"]
    assert m["rel_l2_error"] < 0.05
    assert m["error_ratio_pointwise_over_weak"] > 1.0
    assert report["config"]["n_modes"] == 128
    assert "numpy" in report["versions"]

    with open(out / "results.json") as fh:
        on_disk = json.load(fh)
    assert on_disk["metrics"]["rel_l2_error"] == m["rel_l2_error"]
    with open(out / "errors.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["parameter", "value", "metric", "error"]
    assert len(rows) >= 3
    assert float(rows[1][3]) == m["rel_l2_error"]
    with open(out / "elliptic1d_fields.csv") as fh:
        frows = list(csv.reader(fh))
    assert frows[0] == ["x", "truth", "estimate", "error"]
    data = np.array([[float(v) for v in r] for r in frows[1:]])
    assert np.allclose(data[:, 3], data[:, 2] - data[:, 1], atol=1e-12)


def test_rerun_is_byte_identical(tmp_path):
    names = ["results.json", "errors.csv", "heat_fields.csv"]
    contents = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        run_experiment(ExperimentConfig("heat", 5, out_dir=str(out),
                                        params=SMALL["heat"]))
        contents.append([open(out / n, "rb").read() for n in names])
    assert contents[0] == contents[1]


def test_stage_error_reporting():
    cfg = ExperimentConfig("heat", 0, params=dict(
        SMALL["heat"], dt=0.3, t_final=1.0))
    with pytest.raises(RuntimeError, match="stage"):
        run_experiment(cfg)


def test_check_thresholds():
    good = {"rel_l2_error": 5e-4, "error_ratio_pointwise_over_weak": 100.0}
    assert check_thresholds("elliptic1d", good) == []
    bad = {"rel_l2_error": 5e-3, "error_ratio_pointwise_over_weak": 10.0}
    assert len(check_thresholds("elliptic1d", bad)) == 2
    assert check_thresholds("elliptic1d", good, full_scale=True) == []
    assert len(check_thresholds(
        "elliptic1d", dict(good, rel_l2_error=8e-4), full_scale=True)) == 1
    assert check_thresholds("norm_study", {
        "argmin_s": 1.1, "errors_by_s": {"1.1": 0.1, "2.0": 0.2}}) == []
    assert len(check_thresholds("norm_study", {
        "argmin_s": 2.0, "errors_by_s": {"1.1": 0.3, "2.0": 0.2}})) == 2
    assert check_thresholds("rate_study",
                            {"slope": 2.0, "r_squared": 0.99}) == []


def test_cli_parser():
    p = build_parser()
    args = p.parse_args(["elliptic1d", "--seed", "3", "--check"])
    assert args.experiment == "elliptic1d"
    assert args.seed == 3 and args.check
    with pytest.raises(SystemExit):
        p.parse_args(["unknown_experiment"])


def test_cli_requires_seed(capsys):
    assert main(["rate_study"]) == 1
    assert "seed" in capsys.readouterr().err


def test_cli_rejects_non_mapping_config(tmp_path, capsys):
    f = tmp_path / "cfg.yaml"
    f.write_text("- a\n- b\n")
    assert main(["rate_study", "--config", str(f)]) == 1


def test_cli_run_with_config(tmp_path, capsys):
    f = tmp_path / "cfg.yaml"
    yaml.safe_dump(dict(SMALL["rate_study"], seed=7,
                        out=str(tmp_path / "out")), f.open("w"))
    code = main(["rate_study", "--config", str(f), "--check"])
    out = capsys.readouterr().out
    metrics = json.loads(out)
    assert code == 0
    assert 1.7 <= metrics["slope"] <= 2.3
    assert (tmp_path / "out" / "results.json").exists()


def test_cli_check_flags_violations(tmp_path, capsys):
    f = tmp_path / "cfg.yaml"
    yaml.safe_dump({"n_modes": 64, "truncation": 256, "gamma": 1e-2},
                   f.open("w"))
    code = main(["elliptic1d", "--config", str(f), "--seed", "0", "--check"])
    assert code == 2
    assert "THRESHOLD VIOLATION" in capsys.readouterr().err


def test_all_experiments_have_defaults():
    assert set(EXPERIMENTS) == set(DEFAULTS)
    assert set(SMALL) == set(EXPERIMENTS)
