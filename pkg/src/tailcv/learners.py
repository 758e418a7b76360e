"""Finite classes of angular halfspace classifiers, costs, and exact ERM."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Dataset, TailThreshold, exceedance_indicator


def _unit_rows(X: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(X, axis=1, keepdims=True)
    # zero vectors have no direction: mapped to 0, so they get +1 iff b < 0
    return np.divide(X, r, out=np.zeros_like(X, dtype=float), where=r > 0)


@dataclass(frozen=True, eq=False)
class AngularHalfspace:
    """``+1`` iff ``<w, x/||x||_2> > b``; depends on x only through its direction."""

    id: int
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if not math.isclose(float(np.linalg.norm(w)), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("direction must have unit Euclidean norm")
        if not -1.0 <= self.b <= 1.0:
            raise ValueError(f"offset must lie in [-1, 1], got {self.b}")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(_unit_rows(X) @ self.w > self.b, 1, -1)


class HypothesisClass:
    """Finite indexed family of angular halfspaces plus a VC proxy.

    Classifiers come from the product ``directions x offsets``; classifier
    ``i * len(offsets) + j`` uses direction ``i`` and offset ``j``.
    """

    kind = "AngularHalfspace"

    def __init__(self, directions, offsets: Sequence[float], vc_proxy: float | None = None):
        D = np.atleast_2d(np.asarray(directions, dtype=float))
        offsets = tuple(float(b) for b in offsets)
        if not offsets:
            raise ValueError("at least one offset is required")
        if D.shape[0] < 1:
            raise ValueError("at least one direction is required")
        self.directions = D
        self.offsets = offsets
        self.classifiers = tuple(
            AngularHalfspace(i * len(offsets) + j, w, b)
            for i, w in enumerate(D) for j, b in enumerate(offsets)
        )
        self._W = np.stack([g.w for g in self.classifiers])
        self._b = np.array([g.b for g in self.classifiers])
        if vc_proxy is None:
            vc_proxy = max(1, math.ceil(math.log2(len(self.classifiers))))
        if not vc_proxy > 0:
            raise ValueError("vc_proxy must be positive")
        self.vc_proxy = float(vc_proxy)

    def __len__(self) -> int:
        return len(self.classifiers)

    def __getitem__(self, i: int) -> AngularHalfspace:
        return self.classifiers[i]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def predict_all(self, X) -> np.ndarray:
        """``(|G|, n)`` matrix of predictions in ``{-1, +1}``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(self._W @ _unit_rows(X).T > self._b[:, None], 1, -1)

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "directions": self.directions.tolist(),
            "offsets": list(self.offsets),
            "vc_proxy": self.vc_proxy,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HypothesisClass":
        p = json.loads(text)
        if p.get("kind", cls.kind) != cls.kind:
            raise ValueError(f"unsupported classifier kind {p['kind']!r}")
        return cls(p["directions"], p["offsets"], p.get("vc_proxy"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "HypothesisClass":
        return cls.from_json(Path(path).read_text())


def build_angular_grid(d: int, n_directions: int, offsets: Sequence[float], rng_seed=None,
                       vc_proxy: float | None = None) -> HypothesisClass:
    if d < 2:
        raise ValueError("angular classifiers need d >= 2")
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    if len(offsets) == 0:
        raise ValueError("offsets must be non-empty")
    if any(not -1.0 <= b <= 1.0 for b in offsets):
        raise ValueError("offsets must lie in [-1, 1]")
    rng = np.random.default_rng(rng_seed)
    G = rng.standard_normal((n_directions, d))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return HypothesisClass(G, offsets, vc_proxy)


class CostFunction:
    """Cost ``c(g, o)`` with values in [0, 1].

    Subclasses implement :meth:`matrix`, mapping a ``(|G|, n)`` prediction
    matrix and labels to a ``(|G|, n)`` cost matrix.
    """

    name = "custom"

    def matrix(self, predictions: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, predictions, y) -> np.ndarray:
        c = np.asarray(self.matrix(np.asarray(predictions), np.asarray(y)), dtype=float)
        if c.size and (c.min() < 0.0 or c.max() > 1.0):
            raise ValueError(f"cost {self.name!r} left [0, 1]")
        return c


class Hamming(CostFunction):
    name = "Hamming"

    def matrix(self, predictions, y):
        return (predictions != y).astype(float)


HAMMING = Hamming()


def loss_matrix(hclass: HypothesisClass, cost: CostFunction, data: Dataset) -> np.ndarray:
    """``c(g_i, O_l)`` for every classifier i and point l."""
    return cost(hclass.predict_all(data.X), data.y)


@dataclass(frozen=True)
class ERMResult:
    classifier_id: int
    risk: float
    degenerate: bool


def erm(hclass: HypothesisClass, cost: CostFunction, data: Dataset, subset, alpha: float,
        threshold: TailThreshold, strict: bool = True, losses: np.ndarray | None = None) -> ERMResult:
    """Exact empirical risk minimizer over the finite class on ``subset``.

    Ties go to the lowest classifier id.  A subset without exceedances is
    degenerate: every risk is the empty sum 0 and classifier 0 is returned.
    """
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("ERM on an empty index set")
    if losses is None:
        losses = loss_matrix(hclass, cost, data)
    exceed = exceedance_indicator(data.norms[idx], threshold, strict)
    if not exceed.any():
        return ERMResult(0, 0.0, True)
    risks = losses[:, idx[exceed]].sum(axis=1) / (alpha * idx.size)
    best = int(np.argmin(risks))
    return ERMResult(best, float(risks[best]), False)
