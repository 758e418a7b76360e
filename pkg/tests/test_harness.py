from __future__ import annotations

import json
import math

import numpy as np
import pytest

from tailcv.harness import runner, verify
from tailcv.harness.config import ClassConfig, ExperimentConfig
from tailcv.learners import HAMMING
from tailcv.masks import MaskSequence, Scheme
from tailcv.risk import cv_risk, empirical_risk_alpha
from tailcv.core import order_stat_threshold
from tailcv.sim import GeneratorSpec, HalfspaceNoise, sample


def small_config(**kw):
    base = dict(master_seed=0, generator=GeneratorSpec(eta=HalfspaceNoise((1.0, 0.0), 0.2)),
                hclass=ClassConfig(16, (0.0,)), alpha=0.2, K=5, n_grid=(50,), trials=3,
                m=20_000)
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_trial_identities():
    tr = runner.run_trial(small_config(), 50, 0)
    assert tr.k == 10
    assert tr.lemmaB1_ok
    assert tr.split_identity_max_err <= 1e-12
    assert tr.fold_average_max_err <= 1e-12
    assert tr.ok, tr.checks


def test_run_trial_is_deterministic():
    a = runner.run_trial(small_config(), 50, 1)
    b = runner.run_trial(small_config(), 50, 1)
    assert a.to_row() == b.to_row()
    c = runner.run_trial(small_config(), 50, 2)
    assert a.to_row() != c.to_row()


def test_singleton_class_has_no_selection_bias():
    cfg = small_config(hclass=ClassConfig(1, (0.0,)), m=100_000)
    tr = runner.run_trial(cfg, 50, 0)
    assert tr.report.bias <= 3 * tr.report.mc_stderr


def test_duplicated_masks_equal_holdout():
    cfg = small_config()
    ds = sample(cfg.generator, 50, 0)
    h = cfg.build_class()
    V = tuple(range(0, 50, 5))
    dup = cv_risk(h, HAMMING, ds, MaskSequence(50, Scheme.CUSTOM, (V,) * 4), 0.2)
    T = [i for i in range(50) if i not in V]
    fit = cv_risk(h, HAMMING, ds, MaskSequence(50, Scheme.CUSTOM, (V,)), 0.2).selected[0]
    hold = empirical_risk_alpha(h[fit], HAMMING, ds, V, order_stat_threshold(ds, 0.2), 0.2)
    assert dup.r_hat_cv == pytest.approx(hold, abs=1e-15) and len(T) == 40


def test_config_validation_and_overrides(tmp_path):
    with pytest.raises(ValueError):
        small_config(n_grid=(4,))
    with pytest.raises(ValueError):
        small_config(n_grid=(52,))
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"alpha": 0.1})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"master_seed": 1, "bogus": 2})
    cfg = small_config()
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    back = ExperimentConfig.load(path, ["trials=7", "n_grid=[100, 200]", "scheme=loo"])
    assert back.trials == 7 and back.n_grid == (100, 200) and back.scheme == "loo"
    assert ExperimentConfig.load(path).to_json() == cfg.to_json()
    with pytest.raises(ValueError):
        cfg.with_overrides(["nokey=1"])


def test_scheme_fold_sizes_and_masks():
    cfg = small_config(scheme="lpo_balanced", p=5, rounds=2)
    assert cfg.fold_sizes(50) == (45, 5)
    m = cfg.masks(50, 0)
    assert m.K == 20 and m.n_V == 5
    assert small_config(scheme="loo").fold_sizes(50) == (49, 1)
    assert small_config(scheme="lpo_exact", p=1, n_grid=(20,)).masks(20, 0).K == 20


def test_fit_rate_sanity():
    ks = [25, 50, 100, 200, 400]
    slope, _, r2 = runner.fit_rate(ks, [3.0 / math.sqrt(k) for k in ks])
    assert slope == pytest.approx(-0.5, abs=1e-12) and r2 == pytest.approx(1.0)
    slope, _, _ = runner.fit_rate(ks, [0.2] * 5)
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_rate_experiment_preconditions():
    with pytest.raises(ValueError):
        runner.rate_experiment(small_config(n_grid=(50, 100, 200), trials=50))
    with pytest.raises(ValueError):
        runner.rate_experiment(small_config(n_grid=(50, 100), trials=50))
    with pytest.raises(ValueError):
        runner.rate_experiment(small_config(n_grid=(50, 100, 500), trials=10))


def test_rate_from_trials_with_synthetic_deviations():
    cfg = small_config(n_grid=(50, 100, 500), trials=50, m=2000)
    trials = runner.run_grid(cfg)
    rep = runner.rate_from_trials(trials)
    assert [r["k"] for r in rep.rows] == [10, 20, 100]
    assert all(r["trials"] == 50 for r in rep.rows)
    assert json.loads(json.dumps(rep.to_dict()))["theoretical_slope"] == -0.5


def test_coverage_forced_radii():
    devs = [0.01, 0.2, 0.05]
    assert runner.empirical_coverage(devs, math.inf) == 1.0
    assert runner.empirical_coverage(devs, 0.0) == 0.0


def test_coverage_table_labels():
    cfg = small_config(trials=100, m=2000, delta_grid=(0.05,), M=(1.0, 0.1))
    with pytest.raises(ValueError):
        runner.coverage_diagnostic(small_config(trials=99))
    rows, _ = runner.coverage_diagnostic(cfg)
    assert {r["label"] for r in rows} == {"DIAGNOSTIC"}
    t1 = [r for r in rows if r["formula"] == "theorem1" and r["M"] == 1.0][0]
    assert t1["target"] == pytest.approx(0.25)
    assert {r["formula"] for r in rows} == {"theorem1", "theorem2", "corollary1"}


def test_z_tail_trivia():
    cfg = small_config(n_grid=(50,), trials=500, m=5000, t_grid=(0.0, 50.0))
    with pytest.raises(ValueError):
        runner.z_tail_check(small_config(trials=10))
    (rep,) = runner.z_tail_check(cfg)
    zero, big = rep.rows
    assert zero["bernstein_tail"] == 1.0 and zero["freq_mean_centred"] <= 1.0
    assert big["freq_mean_centred"] == 0.0 and big["dominated_mean"]
    assert "empirical mean" in rep.to_dict()["note"]


def test_verify_suites_small():
    for res in (verify.identity_suite(30, seed=5), verify.mask_balance_suite(max_n=12),
                verify.oracle_suite(20, seed=5)):
        assert res.ok, res.failures[:3]
        assert res.cases > 0


def test_hard_failures_reported():
    tr = runner.run_trial(small_config(), 50, 0)
    broken = runner.TrialResult(**{**tr.__dict__, "checks": {**tr.checks, "lemmaB1": False}})
    assert runner.hard_failures([tr, broken]) == [(50, 0, "lemmaB1")]
    assert runner.summarize_checks([tr, broken])["failures"]["lemmaB1"] == 1
    assert not broken.ok and not broken.lemmaB1_ok
