import csv
import math
import re

import numpy as np
import pytest
import yaml

from stochturnpike import sim
from stochturnpike.control import HorizonError, TurnpikeParams, lyapunov
from stochturnpike.kernels import NonSymmetricCS, SymmetricCS
from stochturnpike.sim import (Ensemble, ExperimentConfig, consensus_diameter, ensemble_mean, run,
                               run_summary, run_turnpike, run_uncontrolled, sample_increments,
                               sample_initial_states, write_run)


def small(**kw):
    base = dict(n_agents=12, m=20, n_bm=4, kernel=SymmetricCS(epsilon=1.0), seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


def test_initial_states_support_and_determinism():
    cfg = ExperimentConfig()
    x = sample_initial_states(cfg)
    assert x.shape == (100,)
    assert np.all((x >= -1) & (x <= 1))
    np.testing.assert_array_equal(x, sample_initial_states(cfg))
    assert not np.array_equal(x, sample_initial_states(cfg.replace(seed=1)))


def test_initial_state_mean_clt():
    x = sample_initial_states(ExperimentConfig(n_agents=10_000))
    assert abs(x.mean()) <= 3 / math.sqrt(3 * x.size)


def test_increment_statistics():
    cfg = ExperimentConfig(m=50, n_bm=20, n_agents=100)
    dW = sample_increments(cfg)
    assert dW.shape == (20, 50, 100)
    assert dW.var() == pytest.approx(cfg.tau, rel=0.05)
    assert abs(dW.mean()) <= 4 * math.sqrt(cfg.tau / dW.size)


def test_increment_path_independence():
    a = sample_increments(ExperimentConfig(n_bm=3))
    b = sample_increments(ExperimentConfig(n_bm=8))
    np.testing.assert_array_equal(a, b[:3])


def test_paths_unchanged_when_ensemble_grows():
    a = run(small(n_bm=2, sigma=0.05, method="em"))
    b = run(small(n_bm=5, sigma=0.05, method="em"))
    np.testing.assert_array_equal(a.paths, b.paths[:2])


def test_full_run_determinism():
    for cfg in (small(sigma=0.05), small(control=TurnpikeParams(), method="serb")):
        a, b = run(cfg), run(cfg)
        assert np.array_equal(a.paths, b.paths)
        assert np.array_equal(a.controls, b.controls)


def test_noise_free_runs_ignore_increments(monkeypatch):
    cfg = small(sigma=0.0, method="em")
    ref = run(cfg)
    monkeypatch.setattr(sim, "sample_increments",
                        lambda c: np.random.default_rng(99).normal(size=(c.n_bm, c.m, c.n_agents)))
    np.testing.assert_array_equal(run(cfg).paths, ref.paths)
    for p in range(cfg.n_bm):
        np.testing.assert_array_equal(ref.paths[p], ref.paths[0])


def test_paired_increments_across_methods():
    a = run(small(method="em", sigma=0.05))
    b = run(small(method="serb", sigma=0.05))
    np.testing.assert_array_equal(a.increments, b.increments)


def test_resampled_initial_states():
    e = run(small(resample_initial=True, sigma=0.0))
    assert not np.array_equal(e.paths[0, 0], e.paths[1, 0])


def test_ensemble_mean_properties():
    e = run(small(sigma=0.05, method="em"))
    np.testing.assert_array_equal(ensemble_mean(e.paths[:1]), e.paths[0])
    np.testing.assert_allclose(ensemble_mean(e.paths + 2.5), ensemble_mean(e) + 2.5, atol=1e-14)
    noiseless = run(small(sigma=0.0))
    np.testing.assert_array_equal(ensemble_mean(noiseless), noiseless.paths[2])
    with pytest.raises(ValueError):
        ensemble_mean(np.zeros((0, 3, 2)))


def test_erb_diameter_non_increasing():
    e = run(ExperimentConfig(m=400, sigma=0.0, method="erb", n_bm=1))
    d = consensus_diameter(e.mean)
    # tolerance absorbs rounding-level wiggles once consensus is reached
    assert np.all(np.diff(d) <= 1e-12 * d[0])


def test_erb_conserves_mean():
    e = run(ExperimentConfig(m=25, sigma=0.0, method="erb", n_bm=1))
    assert abs(e.mean[-1].mean() - e.mean[0].mean()) <= 1e-3


def test_laplacian_linearization_is_stable_on_coarse_grid():
    # the opt-in linearization drops the kernel derivatives and stays contractive
    e = run(ExperimentConfig(m=25, method="serb", linearization="laplacian"))
    d = consensus_diameter(e.mean)
    assert d[-1] <= 0.1 * d[0]


def test_turnpike_switch_step_and_threshold():
    cfg = ExperimentConfig(m=50, control=TurnpikeParams(target=0.7))
    e = run_turnpike(cfg)
    assert e.plan.n_bar == 27
    assert e.plan.t_bar == pytest.approx(0.54, abs=0.01)
    assert lyapunov(e.mean[e.plan.n_bar], 0.7) <= 2e-4
    np.testing.assert_array_equal(e.controls[27:], 0.0)
    assert np.all(np.abs(e.controls[:27]).sum(axis=1) > 0)


def test_turnpike_negative_target():
    e = run_turnpike(ExperimentConfig(m=50, control=TurnpikeParams(target=-1.7)))
    assert e.plan.t_bar == pytest.approx(0.60, abs=0.01)
    assert np.max(np.abs(e.mean[-1] + 1.7)) <= 0.05


def test_turnpike_horizon_too_short():
    with pytest.raises(HorizonError, match="at least"):
        run_turnpike(ExperimentConfig(T=0.3, m=15, control=TurnpikeParams()))


def test_run_turnpike_requires_control():
    with pytest.raises(ValueError):
        run_turnpike(ExperimentConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(m=0)
    with pytest.raises(ValueError):
        ExperimentConfig(method="rk4")
    with pytest.raises(ValueError):
        ExperimentConfig(kernel=NonSymmetricCS(n_agents=50))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"agents": 3})


def test_config_dict_round_trip():
    cfg = ExperimentConfig(kernel=NonSymmetricCS(), control=TurnpikeParams(target=2.3), m=50)
    again = ExperimentConfig.from_dict(yaml.safe_load(yaml.safe_dump(cfg.to_dict())))
    assert again == cfg


def test_summary_keys():
    cfg = ExperimentConfig(m=50, control=TurnpikeParams())
    s = run_summary(run(cfg), cfg)
    assert s["n_bar"] == 27
    assert s["cheap_margin"] > 0
    assert s["turnpike_margin"] > 0
    assert set(run_summary(run(small()), small())) == {"diameter_t0", "diameter_T"}


def test_write_run_outputs(tmp_path):
    cfg = small(control=TurnpikeParams(), m=40)
    e = run(cfg)
    files = write_run(e, cfg, run_summary(e, cfg), tmp_path, "demo")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["demo_config.yaml", "demo_mean.csv", "demo_paths.csv", "demo_plot.py",
                     "demo_report.csv"]
    assert len(files) == 5
    with open(tmp_path / "demo_mean.csv") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    assert len(body) == cfg.m + 1
    assert all(len(r) == 1 + cfg.n_agents for r in body)
    np.testing.assert_array_equal(np.array(body, dtype=float)[:, 1:], e.mean)
    script = (tmp_path / "demo_plot.py").read_text()
    referenced = set(re.findall(r"[\w.-]+\.csv", script))
    assert referenced == {"demo_mean.csv"}
    assert "axvline" in script


def test_write_run_is_byte_reproducible(tmp_path):
    cfg = small(sigma=0.05, method="em")
    for d in ("a", "b"):
        write_run(run(cfg), cfg, None, tmp_path / d, "r")
    for f in ("r_mean.csv", "r_paths.csv", "r_config.yaml"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_write_run_reports_bad_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small()
    with pytest.raises(OSError, match="file"):
        write_run(run(cfg), cfg, None, blocker / "sub", "r")
