"""Cross-validated estimation of classification risk on rare, large-norm events."""

from .core import (Dataset, DegenerateTailError, LabeledPoint, NormKind, TailThreshold,
                   ThresholdSource, exceedance_indicator, order_stat_threshold, tail_rank)
from .learners import HAMMING, AngularHalfspace, Hamming, HypothesisClass, build_angular_grid, erm
from .masks import (MaskSequence, Scheme, kfold_masks, loo_masks, lpo_masks_balanced,
                    lpo_masks_exact, verify_mask_property, verify_train_balance)
from .risk import (PolicyKind, RiskReport, ThresholdPolicy, cv_risk, decomposition,
                   empirical_risk_alpha, pseudo_empirical_risk, true_risk_mc, z_statistic)
from .sim import (Constant, DiscreteAtoms, GeneratorSpec, HalfspaceNoise, UniformSphere,
                  derive_rng, sample, sample_conditional, true_quantile)

__version__ = "0.1.0"
