"""Experiment configuration: one JSON file plus ``key=value`` overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..core import tail_rank
from ..learners import HypothesisClass, build_angular_grid
from ..masks import MaskSequence, kfold_masks, loo_masks, lpo_masks_balanced, lpo_masks_exact
from ..risk import PolicyKind, ThresholdPolicy
from ..sim import GeneratorSpec, derive_rng, true_quantile

SCHEMES = ("kfold", "loo", "lpo_exact", "lpo_balanced")


@dataclass(frozen=True)
class ClassConfig:
    n_directions: int = 8
    offsets: tuple[float, ...] = (0.0,)
    vc_proxy: float | None = None

    @property
    def size(self) -> int:
        return self.n_directions * len(self.offsets)


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    hclass: ClassConfig = field(default_factory=ClassConfig)
    alpha: float = 0.1
    scheme: str = "kfold"
    K: int = 5
    p: int = 1
    rounds: int = 1
    policy: str = PolicyKind.FULL.value
    n_grid: tuple[int, ...] = (250, 500, 1000)
    trials: int = 50
    m: int = 20_000
    delta_grid: tuple[float, ...] = (0.01, 0.05, 0.1)
    M: tuple[float, ...] = (1.0,)
    M5: float = 1.0
    t_grid: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(1, 11))
    output_dir: str = "out"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        PolicyKind(self.policy)
        if self.trials < 1 or self.m < 1:
            raise ValueError("trials and m must be >= 1")
        for n in self.n_grid:
            if tail_rank(n, self.alpha) < 1:
                raise ValueError(f"floor(alpha * n) = 0 for n={n}, alpha={self.alpha}")
            if self.scheme == "kfold" and (self.K < 2 or n % self.K):
                raise ValueError(f"K={self.K} does not divide n={n}")
            if self.scheme in ("lpo_exact", "lpo_balanced") and not 1 <= self.p < n:
                raise ValueError(f"need 1 <= p < n, got p={self.p}, n={n}")
            if self.scheme == "lpo_balanced" and n % self.p:
                raise ValueError(f"p={self.p} does not divide n={n}")
            if self.scheme == "loo" and n < 2:
                raise ValueError("leave-one-out needs n >= 2")

    # -- (de)serialization --------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["generator"] = self.generator.to_dict()
        d["hclass"] = asdict(self.hclass)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, p: dict) -> "ExperimentConfig":
        if "master_seed" not in p:
            raise ValueError("config must set master_seed")
        p = dict(p)
        p["generator"] = GeneratorSpec.from_dict(p.get("generator", {}))
        hc = dict(p.get("hclass", {}))
        if "offsets" in hc:
            hc["offsets"] = tuple(hc["offsets"])
        p["hclass"] = ClassConfig(**hc)
        known = {f.name for f in fields(cls)}
        unknown = set(p) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("n_grid", "delta_grid", "M", "t_grid"):
            if key in p:
                v = p[key]
                p[key] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        return cls(**p)

    @classmethod
    def load(cls, path: str | Path, overrides: list[str] | tuple[str, ...] = ()) -> "ExperimentConfig":
        cfg = cls.from_dict(json.loads(Path(path).read_text()))
        return cfg.with_overrides(overrides)

    def with_overrides(self, overrides) -> "ExperimentConfig":
        """Apply ``key=value`` overrides of top-level fields (values parsed as JSON)."""
        if not overrides:
            return self
        d = self.to_dict()
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValueError(f"override {item!r} is not key=value")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            if key not in d:
                raise ValueError(f"unknown config key {key!r}")
            d[key] = value
        return ExperimentConfig.from_dict(d)

    def replace(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    # -- derived objects ----------------------------------------------
    @property
    def threshold_policy(self) -> ThresholdPolicy:
        return ThresholdPolicy(PolicyKind(self.policy))

    def t_alpha(self) -> float:
        return true_quantile(self.generator, self.alpha)

    def build_class(self) -> HypothesisClass:
        h = self.hclass
        return build_angular_grid(self.generator.d, h.n_directions, h.offsets,
                                  derive_rng(self.master_seed, "class"), h.vc_proxy)

    def masks(self, n: int, trial: int) -> MaskSequence:
        rng = derive_rng(self.master_seed, "masks", n, trial)
        if self.scheme == "kfold":
            return kfold_masks(n, self.K, rng.permutation(n))
        if self.scheme == "loo":
            return loo_masks(n)
        if self.scheme == "lpo_exact":
            return lpo_masks_exact(n, self.p)
        return lpo_masks_balanced(n, self.p, self.rounds, rng)

    def fold_sizes(self, n: int) -> tuple[int, int]:
        """``(n_T, n_V)`` of the configured scheme at sample size n."""
        n_V = {"kfold": n // self.K if self.K else 0, "loo": 1}.get(self.scheme, self.p)
        return n - n_V, n_V

    @property
    def decades_in_k(self) -> float:
        ks = [tail_rank(n, self.alpha) for n in self.n_grid]
        return math.log10(max(ks) / min(ks))
