import json

import numpy as np
import pytest

from abcrecal.core import ParticleSet
from abcrecal.errors import ConfigError
from abcrecal.experiments.common import ExperimentConfig
from abcrecal.experiments.fastpath import loo_positions, loo_positions_pair
from abcrecal.experiments.twisted import PIPELINES, run_twisted_experiment
from abcrecal.recalibration import compute_p
from abcrecal.rejection import weight_bank


def _small_bank(n=400, seed=7):
    rng = np.random.default_rng(seed)
    thetas = rng.standard_normal((n, 2))
    s = thetas[:, 0] + thetas[:, 1] ** 2
    return thetas, s


@pytest.mark.parametrize("estimator", ["ecdf", "regression"])
def test_fastpath_matches_library_positions(estimator):
    # the compiled scalar-summary path must agree with the generic one
    thetas, s = _small_bank()
    bank = ParticleSet(thetas, s[:, None], np.ones(s.size))
    approx = weight_bank(bank, np.array([1.0]), accept_count=60)
    m_local = 60
    p_lib, _ = compute_p(approx, m_local, estimator)
    p_fast, counts = loo_positions(
        s, float(approx.scale[0]), thetas, approx.accepted_index, m_local, estimator
    )
    assert np.all(counts >= 2)
    assert np.max(np.abs(p_fast - p_lib)) < 1e-12


def test_pair_mode_is_two_single_calls():
    thetas, s = _small_bank(seed=8)
    bank = ParticleSet(thetas, s[:, None], np.ones(s.size))
    approx = weight_bank(bank, np.array([0.5]), accept_count=50)
    acc = approx.accepted_index
    scale = float(approx.scale[0])
    pe, pr, counts = loo_positions_pair(s, scale, thetas, acc, 40)
    pe1, c1 = loo_positions(s, scale, thetas, acc, 40, "ecdf")
    pr1, c2 = loo_positions(s, scale, thetas, acc, 40, "regression")
    assert np.array_equal(counts, c1)
    assert np.array_equal(counts, c2)
    assert np.array_equal(pe, pe1)
    assert np.array_equal(pr, pr1)


def test_fastpath_rejects_unknown_estimator():
    thetas, s = _small_bank(seed=9)
    with pytest.raises(ConfigError):
        loo_positions(s, 1.0, thetas, np.arange(5), 4, "spline")


def _tiny_config(tmp_path, **kw):
    base = dict(
        experiment="twisted",
        out_dir=tmp_path,
        seed=3,
        n=800,
        replicates=3,
        grid=(50, 100),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_driver_outputs_and_schema(tmp_path):
    result = run_twisted_experiment(_tiny_config(tmp_path))
    text = (tmp_path / "mse.csv").read_text().splitlines()
    assert text[0] == "pipeline,accept_count,mse,log10_mse"
    assert len(text) == 1 + len(PIPELINES) * 2
    for line in text[1:]:
        name, m, mse, log_mse = line.split(",")
        assert name in PIPELINES
        assert int(m) in (50, 100)
        assert float(mse) > 0
        assert abs(np.log10(float(mse)) - float(log_mse)) < 1e-12

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["counts"] == {"bank": 800, "replicates": 3, "grid": [50, 100]}
    assert manifest["seed"] == 3
    assert manifest["files"]["mse.csv"]["rows"] == len(PIPELINES) * 2
    assert result["mse"].shape == (len(PIPELINES), 2)


def test_driver_reruns_byte_identical(tmp_path):
    run_twisted_experiment(_tiny_config(tmp_path / "a"))
    run_twisted_experiment(_tiny_config(tmp_path / "b"))
    assert (tmp_path / "a/mse.csv").read_bytes() == (tmp_path / "b/mse.csv").read_bytes()


def test_driver_seed_changes_output(tmp_path):
    run_twisted_experiment(_tiny_config(tmp_path / "a"))
    run_twisted_experiment(_tiny_config(tmp_path / "b", seed=4))
    assert (tmp_path / "a/mse.csv").read_bytes() != (tmp_path / "b/mse.csv").read_bytes()
