"""Exact-identity, mask-balance and brute-force-oracle suites.

Each suite returns a :class:`SuiteResult`; the ``verify`` CLI subcommand runs
all of them and exits non-zero on any failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import exceedance_indicator, order_stat_threshold, tail_rank
from ..learners import HAMMING, build_angular_grid, erm, loss_matrix
from ..masks import (kfold_masks, loo_masks, lpo_masks_balanced, lpo_masks_exact,
                     verify_mask_property, verify_train_balance)
from ..risk import (cv_risk, fold_average_error, full_sample_erm, split_identity_error,
                    z_statistic)
from ..sim import Constant, GeneratorSpec, HalfspaceNoise, derive_rng, sample
from . import oracles

TOL = 1e-12


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"name": self.name, "cases": self.cases, "ok": self.ok,
                "failures": self.failures[:50], "n_failures": len(self.failures),
                "stats": self.stats}


def _random_generator(rng: np.random.Generator, d: int) -> GeneratorSpec:
    gamma = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
    if rng.random() < 0.5:
        eta = Constant(float(rng.uniform(0.1, 0.9)))
    else:
        w = rng.standard_normal(d)
        eta = HalfspaceNoise(w / np.linalg.norm(w), float(rng.uniform(0.0, 0.5)))
    return GeneratorSpec(d=d, gamma=gamma, eta=eta)


def _random_masks(rng: np.random.Generator, n: int, enum_cap: int = 10_000):
    kind = rng.choice(["kfold", "loo", "lpo_exact"])
    if kind == "kfold":
        divisors = [K for K in range(2, n + 1) if n % K == 0]
        return kfold_masks(n, int(rng.choice(divisors)), rng.permutation(n))
    if kind == "loo":
        return loo_masks(n)
    ps = [p for p in range(1, min(n - 1, 4) + 1) if math.comb(n, p) <= enum_cap]
    return lpo_masks_exact(n, int(rng.choice(ps)))


def identity_suite(trials: int = 1000, seed: int = 0, max_n: int = 60,
                   max_class: int = 32) -> SuiteResult:
    """CV >= full-sample ERM risk, split identity and fold-average identity."""
    res = SuiteResult("exact_identities")
    worst = {"lemmaB1_margin": math.inf, "split": 0.0, "fold_average": 0.0}
    for t in range(trials):
        rng = derive_rng(seed, "identity-suite", t)
        alpha = float(rng.choice([0.2, 0.5]))
        n = int(rng.integers(math.ceil(1 / alpha), max_n + 1))
        d = int(rng.integers(2, 5))
        spec = _random_generator(rng, d)
        data = sample(spec, n, rng)
        masks = _random_masks(rng, n)
        n_dirs = int(rng.integers(1, max_class + 1))
        offsets = [0.0] if rng.random() < 0.5 else [-0.3, 0.3]
        n_dirs = max(1, min(n_dirs, max_class // len(offsets)))
        hclass = build_angular_grid(d, n_dirs, offsets, rng)
        losses = loss_matrix(hclass, HAMMING, data)
        cv = cv_risk(hclass, HAMMING, data, masks, alpha, losses=losses)
        full = full_sample_erm(hclass, HAMMING, data, alpha, losses=losses)
        thr = order_stat_threshold(data, alpha)
        split = split_identity_error(losses, data, masks, alpha, thr)
        favg = fold_average_error(losses, data, masks, alpha, thr)
        margin = cv.r_hat_cv - full.risk
        worst["lemmaB1_margin"] = min(worst["lemmaB1_margin"], margin)
        worst["split"] = max(worst["split"], split)
        worst["fold_average"] = max(worst["fold_average"], favg)
        tag = f"trial {t} (n={n}, alpha={alpha}, scheme={masks.scheme.value}, |G|={len(hclass)})"
        if margin < -TOL:
            res.failures.append(f"{tag}: CV {cv.r_hat_cv!r} < full-sample {full.risk!r}")
        if split > TOL:
            res.failures.append(f"{tag}: split identity error {split!r}")
        if favg > TOL:
            res.failures.append(f"{tag}: fold-average identity error {favg!r}")
        if np.unique(data.norms).size == n:
            k = tail_rank(n, alpha)
            if int(exceedance_indicator(data.norms, thr).sum()) != k - 1:
                res.failures.append(f"{tag}: exceedance count differs from k - 1")
        res.cases += 1
    res.stats = worst
    return res


def mask_balance_suite(max_n: int = 60, lpo_cap: int = 10_000, max_rounds: int = 10,
                       seed: int = 0) -> SuiteResult:
    """Zero residual in both balance identities for every built-in scheme."""
    res = SuiteResult("mask_balance")

    def check(masks, label):
        res.cases += 1
        v, tr = verify_mask_property(masks), verify_train_balance(masks)
        if not (v.ok and tr.ok):
            res.failures.append(f"{label}: validation residual {v.max_abs_residual}, "
                                f"training residual {tr.max_abs_residual}")

    for n in range(2, max_n + 1):
        for K in range(2, n + 1):
            if n % K == 0:
                check(kfold_masks(n, K, derive_rng(seed, "perm", n, K).permutation(n)),
                      f"kfold n={n} K={K}")
        check(loo_masks(n), f"loo n={n}")
        for p in range(1, n):
            if math.comb(n, p) <= lpo_cap:
                check(lpo_masks_exact(n, p, cap=lpo_cap), f"lpo_exact n={n} p={p}")
            if n % p == 0:
                for rounds in range(1, max_rounds + 1):
                    check(lpo_masks_balanced(n, p, rounds, derive_rng(seed, "lpo", n, p, rounds)),
                          f"lpo_balanced n={n} p={p} rounds={rounds}")
    return res


def oracle_suite(instances: int = 200, seed: int = 0, max_n: int = 20,
                 max_class: int = 8) -> SuiteResult:
    """erm, cv_risk and z_statistic against plain-Python recomputation."""
    res = SuiteResult("oracle_equivalence")
    worst = 0.0
    for t in range(instances):
        rng = derive_rng(seed, "oracle-suite", t)
        alpha = float(rng.choice([0.2, 0.25, 0.5]))
        n = int(rng.integers(math.ceil(1 / alpha), max_n + 1))
        d = int(rng.integers(2, 4))
        spec = _random_generator(rng, d)
        data = sample(spec, n, rng)
        masks = _random_masks(rng, n, enum_cap=2_000)
        hclass = build_angular_grid(d, int(rng.integers(1, max_class + 1)), [0.0], rng)
        X, y, norms = data.X.tolist(), data.y.tolist(), [oracles.l2(x) for x in data.X.tolist()]
        clf = [(g.w.tolist(), g.b) for g in hclass.classifiers]
        tag = f"instance {t} (n={n}, alpha={alpha}, scheme={masks.scheme.value}, |G|={len(hclass)})"

        thr_ref = oracles.threshold(norms, alpha)
        thr = order_stat_threshold(data, alpha)
        S = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
        got = erm(hclass, HAMMING, data, S, alpha, thr)
        ref_id, ref_risk = oracles.erm(clf, X, y, norms, S, thr_ref, alpha)
        if got.classifier_id != ref_id or abs(got.risk - ref_risk) > TOL:
            res.failures.append(f"{tag}: erm {got} vs oracle ({ref_id}, {ref_risk})")

        cv = cv_risk(hclass, HAMMING, data, masks, alpha)
        ref_cv, ref_picks = oracles.cv(clf, X, y, norms, masks.validation_sets, alpha)
        if list(cv.selected) != ref_picks or abs(cv.r_hat_cv - ref_cv) > TOL:
            res.failures.append(f"{tag}: cv {cv.r_hat_cv!r} vs oracle {ref_cv!r}")

        t_alpha = float(np.quantile(data.norms, 1 - alpha))
        true_risks = rng.uniform(0, 1, size=len(hclass))
        z = z_statistic(hclass, HAMMING, data, masks, alpha, t_alpha, true_risks)
        ref_z = oracles.z_statistic(clf, X, y, norms, masks.validation_sets, alpha, t_alpha,
                                    true_risks.tolist())
        if abs(z - ref_z) > TOL:
            res.failures.append(f"{tag}: Z {z!r} vs oracle {ref_z!r}")
        worst = max(worst, abs(cv.r_hat_cv - ref_cv), abs(z - ref_z))
        res.cases += 1
    res.stats = {"max_abs_diff": worst}
    return res


def run_all(seed: int = 0, identity_trials: int = 1000, oracle_instances: int = 200
            ) -> list[SuiteResult]:
    return [identity_suite(identity_trials, seed), mask_balance_suite(seed=seed),
            oracle_suite(oracle_instances, seed)]
