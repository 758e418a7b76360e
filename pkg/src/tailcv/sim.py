"""Heavy-tailed synthetic data with a closed-form tail quantile.

Covariates are ``X = R * Theta`` with a Pareto radius ``P(R > r) = r**-gamma``
(r >= 1) independent of the direction ``Theta``.  With unit-norm directions
``||X|| = R`` exactly, so ``t_alpha = alpha**(-1/gamma)`` and the law of the
sample above ``t_alpha`` is again Pareto, scaled by ``t_alpha``.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, NormKind, compute_norms


# -- random streams ------------------------------------------------------

def derive_rng(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Independent counter-based stream keyed by ``(master_seed, tag, indices)``.

    The stream does not depend on how many other streams were drawn before,
    so trials can be scheduled in any order.
    """
    key = (zlib.crc32(tag.encode()),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# -- generator specification --------------------------------------------

@dataclass(frozen=True)
class UniformSphere:
    kind = "UniformSphere"

    def draw(self, rng: np.random.Generator, m: int, d: int) -> np.ndarray:
        Z = rng.standard_normal((m, d))
        return Z / np.linalg.norm(Z, axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class DiscreteAtoms:
    atoms: np.ndarray
    weights: np.ndarray

    kind = "DiscreteAtoms"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if A.shape[0] != w.shape[0]:
            raise ValueError("one weight per atom is required")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("atom weights must be non-negative and sum to 1")
        object.__setattr__(self, "atoms", A)
        object.__setattr__(self, "weights", w)

    def draw(self, rng: np.random.Generator, m: int, d: int) -> np.ndarray:
        idx = rng.choice(self.atoms.shape[0], size=m, p=self.weights)
        return self.atoms[idx]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class Constant:
    q: float

    kind = "Constant"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("P(Y=+1) must lie in [0, 1]")

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return np.full(theta.shape[0], self.q)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q}


@dataclass(frozen=True, eq=False)
class HalfspaceNoise:
    """``P(Y=+1 | theta) = 1 - epsilon`` on ``<w, theta> > 0``, ``epsilon`` elsewhere."""

    w: np.ndarray
    epsilon: float

    kind = "HalfspaceNoise"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 0.5:
            raise ValueError("label noise must lie in [0, 1/2]")
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return np.where(theta @ self.w > 0, 1.0 - self.epsilon, self.epsilon)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "w": self.w.tolist(), "epsilon": self.epsilon}


def _angular_from_dict(p: dict):
    if p["kind"] == UniformSphere.kind:
        return UniformSphere()
    if p["kind"] == DiscreteAtoms.kind:
        return DiscreteAtoms(p["atoms"], p["weights"])
    raise ValueError(f"unknown angular law {p['kind']!r}")


def _eta_from_dict(p: dict):
    if p["kind"] == Constant.kind:
        return Constant(float(p["q"]))
    if p["kind"] == HalfspaceNoise.kind:
        return HalfspaceNoise(p["w"], float(p["epsilon"]))
    raise ValueError(f"unknown label function {p['kind']!r}")


@dataclass(frozen=True)
class GeneratorSpec:
    d: int = 2
    gamma: float = 2.0
    angular: UniformSphere | DiscreteAtoms = field(default_factory=UniformSphere)
    eta: Constant | HalfspaceNoise = field(default_factory=lambda: Constant(0.5))
    norm_kind: NormKind = NormKind.L2

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("generator dimension must be >= 2")
        if not self.gamma > 0:
            raise ValueError("tail index gamma must be > 0")
        kind = NormKind(self.norm_kind)
        object.__setattr__(self, "norm_kind", kind)
        if isinstance(self.angular, DiscreteAtoms):
            if self.angular.atoms.shape[1] != self.d:
                raise ValueError("atoms must have dimension d")
            if not np.allclose(compute_norms(self.angular.atoms, kind), 1.0, rtol=0, atol=1e-12):
                raise ValueError(f"atoms must have unit {kind.value} norm")
        elif kind is not NormKind.L2:
            raise ValueError("the uniform sphere law requires the L2 norm")
        if isinstance(self.eta, HalfspaceNoise) and self.eta.w.shape[0] != self.d:
            raise ValueError("label direction must have dimension d")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "gamma": self.gamma,
            "angular": self.angular.to_dict(),
            "eta": self.eta.to_dict(),
            "norm_kind": self.norm_kind.value,
        }

    @classmethod
    def from_dict(cls, p: dict) -> "GeneratorSpec":
        return cls(
            d=int(p.get("d", 2)),
            gamma=float(p.get("gamma", 2.0)),
            angular=_angular_from_dict(p.get("angular", {"kind": "UniformSphere"})),
            eta=_eta_from_dict(p.get("eta", {"kind": "Constant", "q": 0.5})),
            norm_kind=p.get("norm_kind", "L2"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "GeneratorSpec":
        return cls.from_json(Path(path).read_text())


# -- sampling ------------------------------------------------------------

def radius_from_uniform(u, gamma: float, scale: float = 1.0) -> np.ndarray:
    """Inverse-CDF map ``u -> scale * u**(-1/gamma)`` onto ``[scale, inf)``."""
    return scale * np.power(u, -1.0 / gamma)


def _draw(spec: GeneratorSpec, m: int, rng: np.random.Generator, scale: float) -> Dataset:
    u = 1.0 - rng.random(m)  # (0, 1]
    R = radius_from_uniform(u, spec.gamma, scale)
    theta = spec.angular.draw(rng, m, spec.d)
    y = np.where(rng.random(m) < spec.eta(theta), 1, -1)
    return Dataset(R[:, None] * theta, y, spec.norm_kind)


def sample(spec: GeneratorSpec, n: int, rng_seed=None) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    return _draw(spec, n, as_generator(rng_seed), 1.0)


def true_quantile(spec: GeneratorSpec, alpha: float) -> float:
    """``t_alpha``, the (1 - alpha)-quantile of ``||X||``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return float(alpha ** (-1.0 / spec.gamma))


def sample_conditional(spec: GeneratorSpec, alpha: float, m: int, rng_seed=None) -> Dataset:
    """Exact draws of ``O`` given ``||X|| >= t_alpha``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return _draw(spec, m, as_generator(rng_seed), true_quantile(spec, alpha))


def conditional_sampler(spec: GeneratorSpec, alpha: float):
    """Callable ``(m, seed) -> Dataset`` drawing from the rare-region law."""
    def draw(m: int, rng_seed=None) -> Dataset:
        return sample_conditional(spec, alpha, m, rng_seed)
    return draw


def rejection_conditional(spec: GeneratorSpec, alpha: float, m: int, rng_seed=None,
                          batch: int = 100_000) -> Dataset:
    """Reference sampler: unconditional draws kept only above ``t_alpha``."""
    rng = as_generator(rng_seed)
    t = true_quantile(spec, alpha)
    Xs, ys, have = [], [], 0
    while have < m:
        ds = _draw(spec, batch, rng, 1.0)
        keep = ds.norms >= t
        Xs.append(ds.X[keep])
        ys.append(ds.y[keep])
        have += int(keep.sum())
    return Dataset(np.concatenate(Xs)[:m], np.concatenate(ys)[:m], spec.norm_kind)

