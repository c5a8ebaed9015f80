import json

import numpy as np
import pytest
from click.testing import CliRunner

from abcrecal.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    return result


def test_simulate_writes_bank_and_manifest(runner, tmp_path):
    out = tmp_path / "r"
    result = _invoke(runner, ["--seed", "2", "--out", str(out),
                              "simulate", "--model", "conjugate-normal", "--n", "20"])
    assert result.exit_code == 0
    lines = (out / "bank.csv").read_text().splitlines()
    assert lines[0] == "theta_theta,s1"
    assert len(lines) == 21
    manifest = json.loads((out / "bank.manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 2
    assert manifest["counts"] == {"particles": 20}
    assert manifest["files"]["bank.csv"]["rows"] == 20


def test_simulate_is_deterministic(runner, tmp_path):
    for sub in ("a", "b"):
        _invoke(runner, ["--seed", "3", "--out", str(tmp_path / sub),
                         "simulate", "--model", "lognormal-sum", "--n", "10"])
    assert (tmp_path / "a/bank.csv").read_bytes() == (tmp_path / "b/bank.csv").read_bytes()


def test_simulate_fixed_theta(runner, tmp_path):
    out = tmp_path / "r"
    result = _invoke(runner, ["--out", str(out), "simulate",
                              "--model", "conjugate-normal", "--n", "5",
                              "--theta", "1.5"])
    assert result.exit_code == 0
    rows = (out / "bank.csv").read_text().splitlines()[1:]
    thetas = {row.split(",")[0] for row in rows}
    assert thetas == {"1.5"}


def test_simulate_rejects_bad_theta_width(runner, tmp_path):
    result = runner.invoke(main, ["--out", str(tmp_path), "simulate",
                                  "--model", "twisted-normal", "--theta", "1.0"])
    assert result.exit_code != 0
    assert "2 values" in result.output


def test_abc_run_from_bank(runner, tmp_path):
    out = tmp_path / "r"
    _invoke(runner, ["--seed", "4", "--out", str(out),
                     "simulate", "--model", "conjugate-normal", "--n", "200"])
    result = _invoke(runner, ["--seed", "4", "--out", str(out), "abc", "run",
                              "--bank", str(out / "bank.csv"),
                              "--s-obs", "0.3", "--accept-count", "40"])
    assert result.exit_code == 0
    assert "40 of 200" in result.output
    lines = (out / "weighted.csv").read_text().splitlines()
    assert lines[0] == "theta_theta,s1,weight"
    weights = np.array([float(l.split(",")[-1]) for l in lines[1:]])
    assert np.count_nonzero(weights) == 40
    manifest = json.loads((out / "weighted.manifest.json").read_text())
    assert manifest["counts"] == {"particles": 200, "accepted": 40}
    assert manifest["config"]["s_obs"] == [0.3]


def test_abc_run_requires_exactly_one_source(runner, tmp_path):
    result = runner.invoke(main, ["--out", str(tmp_path), "abc", "run",
                                  "--s-obs", "0.0"])
    assert result.exit_code != 0
    assert "exactly one of --model or --bank" in result.output


def test_abc_run_requires_exactly_one_target(runner, tmp_path):
    result = runner.invoke(main, ["--out", str(tmp_path), "abc", "run",
                                  "--model", "conjugate-normal", "--n", "50"])
    assert result.exit_code != 0
    assert "exactly one of --s-obs or --obs-theta" in result.output


def test_recalibrate_roundtrip(runner, tmp_path):
    out = tmp_path / "r"
    _invoke(runner, ["--seed", "5", "--out", str(out),
                     "simulate", "--model", "conjugate-normal", "--n", "300"])
    result = _invoke(runner, ["--seed", "5", "--out", str(out), "recalibrate",
                              "--bank", str(out / "bank.csv"), "--s-obs", "0.1",
                              "--accept-count", "60", "--estimator", "regression",
                              "--p-adjust", "logit-regression"])
    assert result.exit_code == 0
    lines = (out / "recalibrated.csv").read_text().splitlines()
    assert lines[0] == "theta_hat_theta,p_theta,p_raw_theta,weight"
    assert len(lines) == 61
    table = np.array([l.split(",") for l in lines[1:]], dtype=float)
    assert np.all((table[:, 2] >= 0) & (table[:, 2] <= 1))
    manifest = json.loads((out / "recalibrated.manifest.json").read_text())
    assert manifest["estimators"] == ["regression"]
    assert manifest["config"]["p_adjust"] == "logit-regression"


def test_diagnose_coverage_outputs(runner, tmp_path):
    out = tmp_path / "r"
    result = _invoke(runner, ["--seed", "6", "--out", str(out),
                              "diagnose", "coverage", "--replicates", "25",
                              "--n", "150", "--accept-count", "30"])
    assert result.exit_code == 0
    assert "coverage" in result.output
    p_lines = (out / "p_values.csv").read_text().splitlines()
    assert p_lines[0] == "p_theta"
    assert len(p_lines) == 26
    cov_lines = (out / "coverage.csv").read_text().splitlines()
    assert cov_lines[0] == ("margin,coverage,interval_level,ks_d,ks_p,"
                            "mean_p,skewness,n_used")
    margin, coverage, level = cov_lines[1].split(",")[:3]
    assert margin == "theta"
    assert 0.0 <= float(coverage) <= 1.0
    assert float(level) == 0.9


def test_experiment_twisted_cli(runner, tmp_path):
    out = tmp_path / "r"
    result = _invoke(runner, ["--seed", "7", "--out", str(out),
                              "experiment", "twisted", "--replicates", "2",
                              "--n", "500", "--grid", "40,80"])
    assert result.exit_code == 0
    assert (out / "mse.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"]["grid"] == [40, 80]
    assert manifest["config"]["seed"] == 7


@pytest.mark.slow
def test_experiment_stereo_cli(runner, tmp_path):
    out = tmp_path / "r"
    result = _invoke(runner, ["--seed", "0", "--out", str(out),
                              "experiment", "stereo", "--n", "1500",
                              "--accept-count", "30", "--m-local", "100"])
    assert result.exit_code == 0
    assert (out / "uniformity.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"] == {
        "bank": 1500, "accepted": 30, "m_local": 100,
        "observed_sections": manifest["counts"]["observed_sections"],
    }


def test_config_file_supplies_defaults_and_flags_win(runner, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('seed = 9\nout = "%s"\n\n[simulate]\nn = 12\n' % (tmp_path / "from_file"))
    result = _invoke(runner, ["--config", str(cfg),
                              "simulate", "--model", "conjugate-normal"])
    assert result.exit_code == 0
    lines = (tmp_path / "from_file" / "bank.csv").read_text().splitlines()
    assert len(lines) == 13
    manifest = json.loads((tmp_path / "from_file" / "bank.manifest.json").read_text())
    assert manifest["seed"] == 9

    result = _invoke(runner, ["--config", str(cfg), "--seed", "1",
                              "--out", str(tmp_path / "cli_wins"),
                              "simulate", "--model", "conjugate-normal", "--n", "3"])
    assert result.exit_code == 0
    manifest = json.loads((tmp_path / "cli_wins" / "bank.manifest.json").read_text())
    assert manifest["seed"] == 1
    assert manifest["counts"] == {"particles": 3}


def test_config_file_json(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 8, "simulate": {"n": 4}}))
    result = _invoke(runner, ["--config", str(cfg), "--out", str(tmp_path / "r"),
                              "simulate", "--model", "conjugate-normal"])
    assert result.exit_code == 0
    manifest = json.loads((tmp_path / "r" / "bank.manifest.json").read_text())
    assert manifest["seed"] == 8
    assert manifest["counts"] == {"particles": 4}


def test_config_file_invalid(runner, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("not = [valid\n")
    result = runner.invoke(main, ["--config", str(cfg), "--out", str(tmp_path),
                                  "simulate", "--model", "conjugate-normal"])
    assert result.exit_code != 0
    assert "neither valid TOML nor valid JSON" in result.output


def test_unknown_model_rejected_by_choice(runner, tmp_path):
    result = runner.invoke(main, ["--out", str(tmp_path),
                                  "simulate", "--model", "nonesuch"])
    assert result.exit_code == 2
    assert "nonesuch" in result.output


def test_negative_seed_rejected(runner, tmp_path):
    result = runner.invoke(main, ["--seed", "-1", "--out", str(tmp_path),
                                  "simulate", "--model", "conjugate-normal"])
    assert result.exit_code != 0
    assert "seed must be nonnegative" in result.output
