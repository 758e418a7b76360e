"""Datasets, norms, order statistics and tail thresholds.

Everything downstream (ERM, CV estimators, the harness) works on a
:class:`Dataset`: an ``(n, d)`` covariate matrix, labels in ``{-1, +1}``
and the cached norm of every row.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class NormKind(str, Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "Linf"


class ThresholdSource(str, Enum):
    EMPIRICAL = "EmpiricalOrderStat"
    TRUE = "TrueQuantile"


class DegenerateTailError(ValueError):
    """Raised when floor(alpha * n) is zero, i.e. the tail holds no point."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabeledPoint:
    x: np.ndarray
    y: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if x.size < 1:
            raise ValueError("covariate vector must have dimension >= 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariate vector has non-finite entries")
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y!r}")
        object.__setattr__(self, "x", _frozen(x.copy()))
        object.__setattr__(self, "y", int(self.y))


def compute_norms(X, norm_kind: NormKind | str = NormKind.L2) -> np.ndarray:
    """Row norms of ``X``.

    ``X`` is either an ``(n, d)`` array or a sequence of :class:`LabeledPoint`.
    """
    norm_kind = NormKind(norm_kind)
    if len(X) and isinstance(X[0], LabeledPoint):
        dims = {p.x.shape[0] for p in X}
        if len(dims) > 1:
            raise ValueError(f"dimension mismatch among points: {sorted(dims)}")
        X = np.stack([p.x for p in X])
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d covariate array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("covariates contain non-finite entries")
    order = {NormKind.L1: 1, NormKind.L2: 2, NormKind.LINF: np.inf}[norm_kind]
    return np.linalg.norm(X, ord=order, axis=1)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labelled sample with cached covariate norms."""

    X: np.ndarray
    y: np.ndarray
    norm_kind: NormKind = NormKind.L2
    norms: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.array(self.y, dtype=np.int64, copy=True).reshape(-1)
        if X.shape[0] < 1:
            raise ValueError("a dataset needs at least one point")
        if X.shape[1] < 1:
            raise ValueError("covariate dimension must be >= 1")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} covariates but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must lie in {-1, +1}")
        kind = NormKind(self.norm_kind)
        norms = compute_norms(X, kind)
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "norm_kind", kind)
        object.__setattr__(self, "norms", _frozen(norms))

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint], norm_kind=NormKind.L2) -> "Dataset":
        if not points:
            raise ValueError("a dataset needs at least one point")
        dims = {p.x.shape[0] for p in points}
        if len(dims) > 1:
            raise ValueError(f"dimension mismatch among points: {sorted(dims)}")
        return cls(np.stack([p.x for p in points]), [p.y for p in points], norm_kind)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def points(self) -> list[LabeledPoint]:
        return [LabeledPoint(x, int(y)) for x, y in zip(self.X, self.y)]

    def subset(self, idx: Iterable[int]) -> "Dataset":
        idx = np.fromiter(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.norm_kind)

    def permuted(self, perm: Sequence[int]) -> "Dataset":
        return self.subset(perm)

    # -- serialization -------------------------------------------------
    def to_csv(self, path: str | Path) -> Path:
        """Write ``x_1..x_d,y`` rows plus a ``.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x_{j + 1}" for j in range(self.d)] + ["y"])
            for x, y in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in x] + [int(y)])
        sidecar = path.with_suffix(".json")
        sidecar.write_text(
            json.dumps({"n": self.n, "d": self.d, "norm_kind": self.norm_kind.value},
                       indent=2, sort_keys=True) + "\n"
        )
        return sidecar

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        sidecar = path.with_suffix(".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[-1] != "y" or any(
            h != f"x_{j + 1}" for j, h in enumerate(header[:-1])
        ):
            raise ValueError(f"unexpected CSV header {header!r}")
        X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=float)
        y = np.array([int(r[-1]) for r in body])
        ds = cls(X, y, meta.get("norm_kind", NormKind.L2))
        if meta and (meta.get("n") != ds.n or meta.get("d") != ds.d):
            raise ValueError(f"sidecar {sidecar} disagrees with CSV shape ({ds.n}, {ds.d})")
        return ds


@dataclass(frozen=True)
class TailThreshold:
    value: float
    alpha: float
    source: ThresholdSource
    rank_k: int | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"threshold must be finite and >= 0, got {self.value}")
        object.__setattr__(self, "source", ThresholdSource(self.source))
        if self.source is ThresholdSource.EMPIRICAL and (self.rank_k is None or self.rank_k < 1):
            raise ValueError("empirical thresholds carry a rank >= 1")

    @classmethod
    def true_quantile(cls, t_alpha: float, alpha: float) -> "TailThreshold":
        return cls(float(t_alpha), alpha, ThresholdSource.TRUE)


def tail_rank(n: int, alpha: float) -> int:
    """floor(alpha * n), robust to binary rounding of products like 0.29 * 100."""
    prod = alpha * n
    k = round(prod) if abs(prod - round(prod)) < 1e-9 else math.floor(prod)
    return int(k)


def order_stat_threshold(data: Dataset | Sequence[float], alpha: float) -> TailThreshold:
    """The floor(alpha*n)-th largest norm.

    Ties are broken by original index (ascending) after a descending sort;
    the value is tie-independent, the ordering is not.
    """
    norms = data.norms if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = norms.shape[0]
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    k = tail_rank(n, alpha)
    if k < 1:
        raise DegenerateTailError(
            f"floor(alpha * n) = 0 for alpha={alpha}, n={n}: no tail order statistic"
        )
    order = np.lexsort((np.arange(n), -norms))
    return TailThreshold(float(norms[order[k - 1]]), alpha, ThresholdSource.EMPIRICAL, k)


def exceedance_indicator(norms, threshold: TailThreshold | float, strict: bool = True) -> np.ndarray:
    value = threshold.value if isinstance(threshold, TailThreshold) else float(threshold)
    if not math.isfinite(value):
        raise ValueError("threshold must be finite")
    norms = np.asarray(norms, dtype=float)
    return norms > value if strict else norms >= value
