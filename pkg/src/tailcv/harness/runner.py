"""Seeded Monte Carlo trials, rate fitting, coverage and Z-tail tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .. import bounds
from ..core import exceedance_indicator, order_stat_threshold, tail_rank
from ..learners import HAMMING, HypothesisClass, loss_matrix
from ..masks import verify_mask_property, verify_train_balance
from ..risk import (PolicyKind, RiskReport, decomposition, fold_average_error, frozen_true_risks,
                    mismatch_statistic, split_identity_error, z_statistic)
from ..sim import derive_rng, sample, sample_conditional
from .config import ExperimentConfig

IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class TrialResult:
    n: int
    k: int
    trial_index: int
    seed: int
    report: RiskReport
    z_value: float
    radii: dict[str, float]
    checks: dict[str, bool]
    split_identity_max_err: float
    fold_average_max_err: float

    @property
    def lemmaB1_ok(self) -> bool:
        return self.checks.get("lemmaB1", True)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def deviation(self) -> float:
        return self.report.deviation

    def to_row(self) -> dict:
        r = self.report
        row = {
            "n": self.n, "k": self.k, "trial": self.trial_index, "seed": self.seed,
            "r_hat_cv": r.r_hat_cv, "r_hat_full": r.r_hat_full, "r_tilde_cv": r.r_tilde_cv,
            "r_cv_true": r.r_cv_true, "r_true_full": r.r_true_full,
            "d_talpha": r.d_talpha, "d_cv": r.d_cv, "bias": r.bias,
            "deviation": r.deviation, "mc_stderr": r.mc_stderr,
            "degenerate_folds": r.degenerate_folds, "z": self.z_value,
            "split_identity_max_err": self.split_identity_max_err,
            "fold_average_max_err": self.fold_average_max_err,
        }
        row.update({f"radius:{k}": v for k, v in sorted(self.radii.items())})
        row.update({f"check:{k}": v for k, v in sorted(self.checks.items())})
        return row


@dataclass
class TrialContext:
    """Objects shared by every trial of one configuration."""

    config: ExperimentConfig
    hclass: HypothesisClass
    t_alpha: float

    @classmethod
    def of(cls, config: ExperimentConfig) -> "TrialContext":
        return cls(config, config.build_class(), config.t_alpha())


def trial_radii(config: ExperimentConfig, n: int, vc: float) -> dict[str, float]:
    n_T, n_V = config.fold_sizes(n)
    M = config.M[0]
    out = {}
    for delta in config.delta_grid:
        inp = bounds.BoundInputs(n, n_T, n_V, config.alpha, vc, M, config.M5, delta)
        vals = bounds.all_radii(inp,
                                K=config.K if config.scheme == "kfold" else None,
                                p=config.p if config.scheme.startswith("lpo") else None)
        out.update({f"{v.formula_id}@{delta!r}": v.radius for v in vals})
    return out


def run_trial(config: ExperimentConfig, n: int, trial_index: int,
              ctx: TrialContext | None = None) -> TrialResult:
    """One seeded trial; deterministic in ``(master_seed, n, trial_index)``."""
    k = tail_rank(n, config.alpha)
    if k < 1:
        raise ValueError(f"floor(alpha * n) = 0 for n={n}")
    ctx = ctx or TrialContext.of(config)
    seed = config.master_seed
    data = sample(config.generator, n, derive_rng(seed, "data", n, trial_index))
    masks = config.masks(n, trial_index)
    cond = sample_conditional(config.generator, config.alpha, config.m,
                              derive_rng(seed, "mc", n, trial_index))
    true = frozen_true_risks(ctx.hclass, HAMMING, cond)
    losses = loss_matrix(ctx.hclass, HAMMING, data)
    policy = config.threshold_policy
    report = decomposition(ctx.hclass, HAMMING, data, masks, config.alpha, ctx.t_alpha,
                           policy=policy, losses=losses, true_risks=true)
    report = replace(report, provenance={**report.provenance, "seed": seed, "n": n,
                                         "trial": trial_index})
    z = z_statistic(ctx.hclass, HAMMING, data, masks, config.alpha, ctx.t_alpha, true[0], losses)

    checks = {
        "triangle": report.deviation <= report.d_talpha + report.d_cv + report.bias
        + 6.0 * report.mc_stderr + IDENTITY_TOL,
    }
    split_err = fold_err = float("nan")
    if policy.kind is PolicyKind.FULL:
        thr = order_stat_threshold(data, config.alpha)
        split_err = split_identity_error(losses, data, masks, config.alpha, thr)
        fold_err = fold_average_error(losses, data, masks, config.alpha, thr)
        checks["lemmaB1"] = report.r_hat_cv >= report.r_hat_full - IDENTITY_TOL
        checks["split_identity"] = split_err <= IDENTITY_TOL
        checks["fold_average"] = fold_err <= IDENTITY_TOL
        checks["mismatch_bound"] = report.d_talpha <= mismatch_statistic(
            data.norms, thr, ctx.t_alpha, config.alpha) + IDENTITY_TOL
        if np.unique(data.norms).size == n:
            checks["exceedance_count"] = int(exceedance_indicator(data.norms, thr).sum()) == k - 1
        checks["mask_balance"] = verify_mask_property(masks).ok and verify_train_balance(masks).ok
    return TrialResult(n, k, trial_index, seed, report, z,
                       trial_radii(config, n, ctx.hclass.vc_proxy), checks, split_err, fold_err)


def run_grid(config: ExperimentConfig, progress: Callable[[int, int], None] | None = None
             ) -> list[TrialResult]:
    """All trials of the configuration, ordered by ``(n, trial_index)``."""
    ctx = TrialContext.of(config)
    out = []
    for n in config.n_grid:
        for t in range(config.trials):
            out.append(run_trial(config, n, t, ctx))
        if progress:
            progress(n, config.trials)
    return out


# -- rate ----------------------------------------------------------------

def fit_rate(ks: Iterable[float], deviations: Iterable[float]) -> tuple[float, float, float]:
    """Least squares of ``log(deviation)`` on ``log(k)``: ``(slope, intercept, R^2)``."""
    x = np.log(np.asarray(list(ks), dtype=float))
    y = np.log(np.asarray(list(deviations), dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points to fit a rate")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class RateReport:
    rows: tuple[dict, ...]
    slope: float
    intercept: float
    r2: float
    theoretical_slope: float = -0.5

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "slope": self.slope, "intercept": self.intercept,
                "r2": self.r2, "theoretical_slope": self.theoretical_slope}


def rate_from_trials(trials: list[TrialResult], min_points: int = 3,
                     min_trials: int = 50) -> RateReport:
    by_n: dict[int, list[TrialResult]] = {}
    for tr in trials:
        by_n.setdefault(tr.n, []).append(tr)
    if len(by_n) < min_points:
        raise ValueError(f"rate fit needs >= {min_points} grid points, got {len(by_n)}")
    rows = []
    for n in sorted(by_n):
        devs = np.array([t.deviation for t in by_n[n]])
        if devs.size < min_trials:
            raise ValueError(f"rate fit needs >= {min_trials} trials per n, got {devs.size} at n={n}")
        rows.append({"n": n, "k": by_n[n][0].k, "trials": int(devs.size),
                     "mean_deviation": float(devs.mean()),
                     "q90_deviation": float(np.quantile(devs, 0.9))})
    slope, intercept, r2 = fit_rate([r["k"] for r in rows], [r["mean_deviation"] for r in rows])
    return RateReport(tuple(rows), slope, intercept, r2)


def rate_experiment(config: ExperimentConfig, trials: list[TrialResult] | None = None,
                    progress=None) -> tuple[RateReport, list[TrialResult]]:
    if len(config.n_grid) < 3 or config.trials < 50:
        raise ValueError("rate experiment needs >= 3 grid points and >= 50 trials each")
    if config.decades_in_k < 1.0:
        raise ValueError("n_grid must span at least one decade in k = floor(alpha n)")
    trials = trials if trials is not None else run_grid(config, progress)
    return rate_from_trials(trials), trials


# -- coverage ------------------------------------------------------------

def empirical_coverage(deviations, radius: float) -> float:
    devs = np.asarray(deviations, dtype=float)
    return float(np.mean(devs <= radius))


def coverage_diagnostic(config: ExperimentConfig, trials: list[TrialResult] | None = None,
                        progress=None) -> tuple[list[dict], list[TrialResult]]:
    """DIAGNOSTIC coverage table per ``(n, delta, formula, M)``; never an acceptance gate."""
    if config.trials < 100:
        raise ValueError("coverage diagnostic needs >= 100 trials per cell")
    trials = trials if trials is not None else run_grid(config, progress)
    vc = config.build_class().vc_proxy
    rows = []
    for n in config.n_grid:
        devs = [t.deviation for t in trials if t.n == n]
        n_T, n_V = config.fold_sizes(n)
        for M in config.M:
            for delta in config.delta_grid:
                inp = bounds.BoundInputs(n, n_T, n_V, config.alpha, vc, M, config.M5, delta)
                vals = bounds.all_radii(inp,
                                        K=config.K if config.scheme == "kfold" else None,
                                        p=config.p if config.scheme.startswith("lpo") else None)
                for v in vals:
                    rows.append({
                        "label": "DIAGNOSTIC", "n": n, "delta": delta, "formula": v.formula_id,
                        "M": M, "M5": config.M5, "radius": v.radius,
                        "coverage": empirical_coverage(devs, v.radius),
                        "target": v.coverage, "trials": len(devs), "note": v.note,
                    })
    return rows, trials


# -- Z tail --------------------------------------------------------------

@dataclass(frozen=True)
class ZTailReport:
    n: int
    n_V: int
    trials: int
    mean_z: float
    expected_z_bound: float
    rows: tuple[dict, ...]
    z_values: tuple[float, ...] = field(repr=False, default=())
    note: str = ("mean-centred rows substitute the empirical mean of Z for E(Z); "
                 "bound-centred rows centre at the stand-in expectation bound")

    @property
    def dominated(self) -> bool:
        return all(r["dominated_mean"] for r in self.rows)

    def to_dict(self) -> dict:
        return {"n": self.n, "n_V": self.n_V, "trials": self.trials, "mean_z": self.mean_z,
                "expected_z_bound": self.expected_z_bound, "rows": list(self.rows),
                "dominated": self.dominated, "note": self.note}


def z_tail_check(config: ExperimentConfig, min_trials: int = 500) -> list[ZTailReport]:
    """Empirical tail of Z against the Bernstein envelope, for every n in the grid."""
    if config.trials < min_trials:
        raise ValueError(f"z-tail check needs >= {min_trials} trials")
    hclass = config.build_class()
    t_alpha = config.t_alpha()
    cond = sample_conditional(config.generator, config.alpha, config.m,
                              derive_rng(config.master_seed, "ztail-mc"))
    true_risks, _ = frozen_true_risks(hclass, HAMMING, cond)
    out = []
    for n in config.n_grid:
        _, n_V = config.fold_sizes(n)
        zs = np.empty(config.trials)
        for t in range(config.trials):
            data = sample(config.generator, n, derive_rng(config.master_seed, "data", n, t))
            zs[t] = z_statistic(hclass, HAMMING, data, config.masks(n, t), config.alpha,
                                t_alpha, true_risks)
        mean_z = float(zs.mean())
        ez = bounds.expected_z_bound(n_V, config.alpha, config.M[0], hclass.vc_proxy)
        rows = []
        for t in config.t_grid:
            env = bounds.bernstein_tail(n, config.alpha, t)
            f_mean = float(np.mean(zs - mean_z >= t))
            f_bound = float(np.mean(zs - ez >= t))
            rows.append({"t": t, "bernstein_tail": env,
                         "freq_mean_centred": f_mean, "dominated_mean": f_mean <= env,
                         "freq_bound_centred": f_bound, "dominated_bound": f_bound <= env})
        out.append(ZTailReport(n, n_V, config.trials, mean_z, ez, tuple(rows),
                               tuple(zs.tolist())))
    return out


def hard_failures(trials: list[TrialResult]) -> list[tuple[int, int, str]]:
    return [(t.n, t.trial_index, name) for t in trials for name, ok in t.checks.items() if not ok]


def summarize_checks(trials: list[TrialResult]) -> dict:
    names = sorted({name for t in trials for name in t.checks})
    return {
        "trials": len(trials),
        "failures": {name: sum(not t.checks.get(name, True) for t in trials) for name in names},
        "max_split_identity_err": max((t.split_identity_max_err for t in trials
                                       if not math.isnan(t.split_identity_max_err)), default=0.0),
        "max_fold_average_err": max((t.fold_average_max_err for t in trials
                                     if not math.isnan(t.fold_average_max_err)), default=0.0),
    }
