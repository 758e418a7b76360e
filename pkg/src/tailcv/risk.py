"""Conditional risk functionals, the CV estimator and its error decomposition.

Conventions shared by every function here:

* ``R_hat(g, S) = sum_{i in S} c(g, O_i) 1{||X_i|| > thr} / (alpha |S|)``, where
  ``thr`` is fixed by a :class:`ThresholdPolicy`.  The default policy uses one
  order statistic of the full sample for every subset, which is what makes
  the split and fold-average identities exact.
* The pseudo-empirical risk replaces ``thr`` with the true quantile ``t_alpha``.
* True conditional risks are Monte Carlo means over draws from the rare-region
  law; inside a trial one frozen draw is shared by all classifiers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import (Dataset, TailThreshold, ThresholdSource, exceedance_indicator,
                   order_stat_threshold)
from .learners import CostFunction, ERMResult, HypothesisClass, erm, loss_matrix
from .masks import MaskSequence

Sampler = Callable[..., Dataset]


class PolicyKind(str, Enum):
    FULL = "FullSampleOrderStat"
    PER_SUBSET = "PerSubsetOrderStat"
    TRUE = "TrueQuantile"


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: PolicyKind = PolicyKind.FULL
    t_alpha: float | None = None
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.TRUE and self.t_alpha is None:
            raise ValueError("the true-quantile policy needs t_alpha")

    @classmethod
    def full_sample(cls, strict: bool = True) -> "ThresholdPolicy":
        return cls(PolicyKind.FULL, strict=strict)

    @classmethod
    def per_subset(cls, strict: bool = True) -> "ThresholdPolicy":
        return cls(PolicyKind.PER_SUBSET, strict=strict)

    @classmethod
    def true_quantile(cls, t_alpha: float, strict: bool = True) -> "ThresholdPolicy":
        return cls(PolicyKind.TRUE, float(t_alpha), strict)

    @property
    def shared(self) -> bool:
        """True when every subset is thresholded at the same level."""
        return self.kind is not PolicyKind.PER_SUBSET

    def threshold(self, data: Dataset, subset, alpha: float) -> TailThreshold:
        if self.kind is PolicyKind.FULL:
            return order_stat_threshold(data, alpha)
        if self.kind is PolicyKind.TRUE:
            return TailThreshold.true_quantile(self.t_alpha, alpha)
        idx = np.asarray(list(subset), dtype=np.int64)
        return order_stat_threshold(data.norms[idx], alpha)


FULL_SAMPLE = ThresholdPolicy.full_sample()


def _costs_of(g, cost: CostFunction, data: Dataset) -> np.ndarray:
    return cost(np.asarray(g.predict(data.X))[None, :], data.y)[0]


def empirical_risk_alpha(g, cost: CostFunction, data: Dataset, subset, threshold: TailThreshold,
                         alpha: float, strict: bool = True) -> float:
    idx = np.asarray(list(subset), dtype=np.int64)
    if alpha * idx.size == 0:
        raise ValueError("alpha * |S| = 0: the risk normalization vanishes")
    c = _costs_of(g, cost, data)[idx]
    exceed = exceedance_indicator(data.norms[idx], threshold, strict)
    return float(c[exceed].sum() / (alpha * idx.size))


def pseudo_empirical_risk(g, cost: CostFunction, data: Dataset, subset, t_alpha: float,
                          alpha: float) -> float:
    return empirical_risk_alpha(g, cost, data, subset,
                                TailThreshold.true_quantile(t_alpha, alpha), alpha)


def true_risk_mc(g, cost: CostFunction, sampler: Sampler, m: int, rng_seed=None) -> tuple[float, float]:
    """Mean cost over ``m`` draws of the rare-region law, with its standard error."""
    if m < 1:
        raise ValueError("m must be >= 1")
    c = _costs_of(g, cost, sampler(m, rng_seed))
    stderr = float(c.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return float(c.mean()), stderr


def frozen_true_risks(hclass: HypothesisClass, cost: CostFunction,
                      conditional: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """True-risk estimates of every classifier on one shared conditional sample."""
    c = loss_matrix(hclass, cost, conditional)
    m = c.shape[1]
    stderr = c.std(axis=1, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(c.shape[0])
    return c.mean(axis=1), stderr


# -- cross-validation ----------------------------------------------------

@dataclass(frozen=True)
class CVResult:
    r_hat_cv: float
    per_fold: tuple[float, ...]
    selected: tuple[int, ...]
    train_degenerate: tuple[bool, ...]
    validation_degenerate: tuple[bool, ...]

    @property
    def degenerate_folds(self) -> int:
        """Folds whose training or validation set holds no exceedance."""
        return sum(a or b for a, b in zip(self.train_degenerate, self.validation_degenerate))


def _check_masks(data: Dataset, masks: MaskSequence) -> None:
    if masks.n != data.n:
        raise ValueError(f"masks are built for n={masks.n}, dataset has n={data.n}")
    if min(masks.n - s for s in masks.sizes) == 0:
        raise ValueError("a training set is empty; every mask must leave training data")
    if min(masks.sizes) == 0:
        raise ValueError("a validation set is empty")


@dataclass(frozen=True, eq=False)
class _SharedFolds:
    """Per-classifier loss sums on every V_j and T_j under one shared threshold."""

    full: np.ndarray        # (G,)
    val: np.ndarray         # (G, K)
    train: np.ndarray       # (G, K)
    n_val: np.ndarray       # (K,)
    n_train: np.ndarray     # (K,)
    exceed_val: np.ndarray  # (K,) exceedance counts
    exceed_train: np.ndarray

    @classmethod
    def build(cls, losses: np.ndarray, exceed: np.ndarray, masks: MaskSequence) -> "_SharedFolds":
        M = masks.membership.astype(float)
        W = losses * exceed
        val = W @ M.T
        full = W.sum(axis=1)
        ev = M @ exceed.astype(float)
        n_val = np.asarray(masks.sizes, dtype=float)
        return cls(full, val, full[:, None] - val, n_val, masks.n - n_val,
                   ev, exceed.sum() - ev)


def _shared_threshold(data: Dataset, alpha: float, policy: ThresholdPolicy) -> TailThreshold:
    return policy.threshold(data, range(data.n), alpha)


def cv_risk(hclass: HypothesisClass, cost: CostFunction, data: Dataset, masks: MaskSequence,
            alpha: float, policy: ThresholdPolicy = FULL_SAMPLE,
            losses: np.ndarray | None = None) -> CVResult:
    """K-fold style CV estimate of the conditional risk of the ERM rule."""
    _check_masks(data, masks)
    if losses is None:
        losses = loss_matrix(hclass, cost, data)
    if policy.shared:
        thr = _shared_threshold(data, alpha, policy)
        f = _SharedFolds.build(losses, exceedance_indicator(data.norms, thr, policy.strict), masks)
        # argmin takes the first minimum: lowest id wins ties, as in erm()
        selected = np.argmin(f.train / (alpha * f.n_train), axis=0)
        cols = np.arange(masks.K)
        per_fold = f.val[selected, cols] / (alpha * f.n_val)
        return CVResult(float(per_fold.mean()), tuple(per_fold.tolist()), tuple(selected.tolist()),
                        tuple((f.exceed_train == 0).tolist()), tuple((f.exceed_val == 0).tolist()))

    per_fold, selected, t_deg, v_deg = [], [], [], []
    for j in range(masks.K):
        T, V = masks.training_set(j), masks.validation_sets[j]
        fit = erm(hclass, cost, data, T, alpha, policy.threshold(data, T, alpha),
                  policy.strict, losses)
        thr_v = policy.threshold(data, V, alpha)
        ex = exceedance_indicator(data.norms[list(V)], thr_v, policy.strict)
        per_fold.append(float(losses[fit.classifier_id, list(V)][ex].sum() / (alpha * len(V))))
        selected.append(fit.classifier_id)
        t_deg.append(fit.degenerate)
        v_deg.append(not ex.any())
    return CVResult(float(np.mean(per_fold)), tuple(per_fold), tuple(selected),
                    tuple(t_deg), tuple(v_deg))


def full_sample_erm(hclass: HypothesisClass, cost: CostFunction, data: Dataset, alpha: float,
                    policy: ThresholdPolicy = FULL_SAMPLE,
                    losses: np.ndarray | None = None) -> ERMResult:
    """``Psi(S_n)`` and its empirical risk ``R_hat(Psi(S_n), S_n)``."""
    S = range(data.n)
    return erm(hclass, cost, data, S, alpha, policy.threshold(data, S, alpha), policy.strict, losses)


def _pseudo_fold_risks(losses: np.ndarray, data: Dataset, masks: MaskSequence, alpha: float,
                       t_alpha: float) -> np.ndarray:
    """``(G, K)`` matrix of pseudo-empirical risks on each validation set."""
    exceed = exceedance_indicator(data.norms, t_alpha, strict=True)
    f = _SharedFolds.build(losses, exceed, masks)
    return f.val / (alpha * f.n_val)


def cv_pseudo_risk(hclass: HypothesisClass, cost: CostFunction, data: Dataset, masks: MaskSequence,
                   alpha: float, t_alpha: float, policy: ThresholdPolicy = FULL_SAMPLE,
                   losses: np.ndarray | None = None, cv: CVResult | None = None) -> float:
    """Average over folds of the pseudo-empirical validation risk of ``Psi(T_j)``."""
    if losses is None:
        losses = loss_matrix(hclass, cost, data)
    if cv is None:
        cv = cv_risk(hclass, cost, data, masks, alpha, policy, losses)
    P = _pseudo_fold_risks(losses, data, masks, alpha, t_alpha)
    return float(P[list(cv.selected), np.arange(masks.K)].mean())


def cv_true_risk(hclass: HypothesisClass, cost: CostFunction, data: Dataset, masks: MaskSequence,
                 alpha: float, policy: ThresholdPolicy, sampler: Sampler, m: int, seed=None,
                 losses: np.ndarray | None = None) -> float:
    """Average true conditional risk of the fold-wise ERM classifiers."""
    cv = cv_risk(hclass, cost, data, masks, alpha, policy, losses)
    risks, _ = frozen_true_risks(hclass, cost, sampler(m, seed))
    return float(risks[list(cv.selected)].mean())


# -- decomposition -------------------------------------------------------

@dataclass(frozen=True)
class RiskReport:
    r_hat_cv: float
    r_hat_full: float
    r_tilde_cv: float
    r_cv_true: float
    r_true_full: float
    d_talpha: float
    d_cv: float
    bias: float
    mc_stderr: float
    degenerate_folds: int
    selected: tuple[int, ...] = ()
    full_id: int = 0
    provenance: dict = field(default_factory=dict)

    @property
    def deviation(self) -> float:
        """``|R_hat_CV - R(Psi(S_n))|``."""
        return abs(self.r_hat_cv - self.r_true_full)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selected"] = list(self.selected)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def decomposition(hclass: HypothesisClass, cost: CostFunction, data: Dataset, masks: MaskSequence,
                  alpha: float, t_alpha: float, sampler: Sampler | None = None, m: int = 0,
                  seed=None, policy: ThresholdPolicy = FULL_SAMPLE,
                  losses: np.ndarray | None = None,
                  true_risks: tuple[np.ndarray, np.ndarray] | None = None) -> RiskReport:
    """Threshold error, validation deviation and selection bias of the CV estimate.

    True risks come from one frozen conditional sample of size ``m`` drawn with
    ``sampler(m, seed)``, or are passed in directly as ``(risks, stderrs)``.
    """
    if losses is None:
        losses = loss_matrix(hclass, cost, data)
    if true_risks is None:
        if sampler is None or m < 1:
            raise ValueError("either true_risks or a sampler with m >= 1 is required")
        true_risks = frozen_true_risks(hclass, cost, sampler(m, seed))
    risks, stderrs = (np.asarray(a, dtype=float) for a in true_risks)

    cv = cv_risk(hclass, cost, data, masks, alpha, policy, losses)
    full = full_sample_erm(hclass, cost, data, alpha, policy, losses)
    r_tilde = cv_pseudo_risk(hclass, cost, data, masks, alpha, t_alpha, policy, losses, cv)
    sel = list(cv.selected)
    r_cv_true = float(risks[sel].mean())
    r_true_full = float(risks[full.classifier_id])
    involved = sorted(set(sel) | {full.classifier_id})
    return RiskReport(
        r_hat_cv=cv.r_hat_cv,
        r_hat_full=full.risk,
        r_tilde_cv=r_tilde,
        r_cv_true=r_cv_true,
        r_true_full=r_true_full,
        d_talpha=abs(cv.r_hat_cv - r_tilde),
        d_cv=abs(r_tilde - r_cv_true),
        bias=abs(r_cv_true - r_true_full),
        mc_stderr=float(stderrs[involved].max()),
        degenerate_folds=cv.degenerate_folds,
        selected=tuple(sel),
        full_id=full.classifier_id,
        provenance={"policy": policy.kind.value, "scheme": masks.scheme.value, "m": int(m)},
    )


def z_statistic(hclass: HypothesisClass, cost: CostFunction, data: Dataset, masks: MaskSequence,
                alpha: float, t_alpha: float, true_risks, losses: np.ndarray | None = None) -> float:
    """Fold average of the largest pseudo-risk deviation over the class."""
    true_risks = np.asarray(true_risks, dtype=float).reshape(-1)
    if true_risks.shape[0] != len(hclass):
        raise ValueError(f"{true_risks.shape[0]} true risks for a class of {len(hclass)}")
    if masks.n != data.n:
        raise ValueError("masks and dataset disagree on n")
    if losses is None:
        losses = loss_matrix(hclass, cost, data)
    P = _pseudo_fold_risks(losses, data, masks, alpha, t_alpha)
    return float(np.abs(P - true_risks[:, None]).max(axis=0).mean())


# -- exact identities ----------------------------------------------------

def split_identity_error(losses: np.ndarray, data: Dataset, masks: MaskSequence, alpha: float,
                         threshold: TailThreshold | None = None) -> float:
    """Max over (g, j) of ``|R_hat(g,S_n) - (n_V R_hat(g,V_j) + n_T R_hat(g,T_j)) / n|``."""
    thr = threshold or order_stat_threshold(data, alpha)
    f = _SharedFolds.build(losses, exceedance_indicator(data.norms, thr), masks)
    n = data.n
    r_full = f.full / (alpha * n)
    r_val = f.val / (alpha * f.n_val)
    r_train = f.train / (alpha * f.n_train)
    recombined = (f.n_val * r_val + f.n_train * r_train) / n
    return float(np.abs(r_full[:, None] - recombined).max())


def fold_average_error(losses: np.ndarray, data: Dataset, masks: MaskSequence, alpha: float,
                       threshold: TailThreshold | None = None) -> float:
    """Max over g of ``|(1/K) sum_j R_hat(g, V_j) - R_hat(g, S_n)|``."""
    thr = threshold or order_stat_threshold(data, alpha)
    f = _SharedFolds.build(losses, exceedance_indicator(data.norms, thr), masks)
    r_full = f.full / (alpha * data.n)
    r_avg = (f.val / (alpha * f.n_val)).mean(axis=1)
    return float(np.abs(r_avg - r_full).max())


def mismatch_statistic(norms, empirical: TailThreshold, t_alpha: float, alpha: float) -> float:
    """``(1/(n alpha)) sum_i |1{||X_i|| > ||X_(k)||} - 1{||X_i|| >= t_alpha}|``."""
    if empirical.source is not ThresholdSource.EMPIRICAL:
        raise ValueError("the mismatch statistic compares against the empirical order statistic")
    norms = np.asarray(norms, dtype=float)
    u = exceedance_indicator(norms, empirical, strict=True) != exceedance_indicator(
        norms, t_alpha, strict=False)
    return float(u.sum() / (norms.shape[0] * alpha))
