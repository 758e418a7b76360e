"""Validation-mask sequences for CV schemes and exact balance checks.

A mask sequence is the list of validation sets ``V_1..V_K``; training sets
are their complements.  Balance is verified in rational arithmetic so the
identities can be asserted with zero tolerance.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 200_000


class Scheme(str, Enum):
    KFOLD = "KFold"
    LOO = "LOO"
    LPO_EXACT = "LPOExact"
    LPO_BALANCED = "LPOBalancedSample"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class MaskSequence:
    n: int
    scheme: Scheme
    validation_sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        vs = tuple(tuple(sorted(int(i) for i in v)) for v in self.validation_sets)
        if not vs:
            raise ValueError("a mask sequence needs at least one validation set")
        for v in vs:
            if len(set(v)) != len(v):
                raise ValueError("validation set with repeated indices")
            if v and (v[0] < 0 or v[-1] >= self.n):
                raise ValueError(f"validation index out of range for n={self.n}")
        object.__setattr__(self, "validation_sets", vs)
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def K(self) -> int:
        return len(self.validation_sets)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.validation_sets)

    @property
    def uniform(self) -> bool:
        return len(set(self.sizes)) == 1

    @property
    def n_V(self) -> int:
        if not self.uniform:
            raise ValueError("validation sets have unequal sizes; n_V is undefined")
        return self.sizes[0]

    @property
    def n_T(self) -> int:
        return self.n - self.n_V

    @cached_property
    def membership(self) -> np.ndarray:
        """Boolean ``(K, n)`` matrix, ``membership[j, l] = l in V_j``."""
        m = np.zeros((self.K, self.n), dtype=bool)
        for j, v in enumerate(self.validation_sets):
            m[j, list(v)] = True
        m.flags.writeable = False
        return m

    def training_set(self, j: int) -> tuple[int, ...]:
        v = set(self.validation_sets[j])
        return tuple(i for i in range(self.n) if i not in v)

    @property
    def training_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.training_set(j) for j in range(self.K))

    def relabeled(self, perm: Sequence[int]) -> "MaskSequence":
        """Masks for the dataset ``data.permuted(perm)``: old index ``perm[i]`` becomes ``i``."""
        inverse = np.empty(self.n, dtype=np.int64)
        inverse[np.asarray(perm)] = np.arange(self.n)
        return MaskSequence(self.n, self.scheme,
                            tuple(tuple(int(inverse[i]) for i in v) for v in self.validation_sets))

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "scheme": self.scheme.value,
            "n_V": self.n_V if self.uniform else None,
            "validation_sets": [list(v) for v in self.validation_sets],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MaskSequence":
        payload = json.loads(text)
        ms = cls(payload["n"], payload["scheme"], tuple(map(tuple, payload["validation_sets"])))
        if payload.get("n_V") is not None and ms.n_V != payload["n_V"]:
            raise ValueError("declared n_V disagrees with the validation sets")
        return ms

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MaskSequence":
        return cls.from_json(Path(path).read_text())


def kfold_masks(n: int, K: int, permutation: Sequence[int] | None = None) -> MaskSequence:
    """K contiguous blocks of the (optionally permuted) index order."""
    if K < 1 or (K < 2 and n > 1):
        raise ValueError(f"K-fold needs K >= 2, got K={K}")
    if n % K:
        raise ValueError(f"K={K} does not divide n={n}")
    order = np.arange(n) if permutation is None else np.asarray(permutation, dtype=np.int64)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("permutation must be a rearrangement of 0..n-1")
    size = n // K
    blocks = tuple(tuple(order[j * size:(j + 1) * size].tolist()) for j in range(K))
    scheme = Scheme.LOO if K == n else Scheme.KFOLD
    return MaskSequence(n, scheme, blocks)


def loo_masks(n: int) -> MaskSequence:
    return kfold_masks(n, n)


def lpo_masks_exact(n: int, p: int, cap: int = DEFAULT_ENUMERATION_CAP) -> MaskSequence:
    """All C(n, p) validation sets of size p, in lexicographic order."""
    if not (1 <= p < n):
        raise ValueError(f"leave-p-out needs 1 <= p < n, got p={p}, n={n}")
    count = math.comb(n, p)
    if count > cap:
        raise ValueError(
            f"C({n},{p}) = {count} masks exceeds the cap {cap}; "
            "use lpo_masks_balanced for a balanced subsample"
        )
    scheme = Scheme.LOO if p == 1 else Scheme.LPO_EXACT
    return MaskSequence(n, scheme, tuple(itertools.combinations(range(n), p)))


def lpo_masks_balanced(n: int, p: int, rounds: int, rng_seed=None) -> MaskSequence:
    """``rounds`` random partitions of 0..n-1 into blocks of size p.

    Every index lands in exactly ``rounds`` validation sets, so the balance
    identity holds exactly, unlike uniform random p-subsets.
    """
    if p < 1 or n % p:
        raise ValueError(f"p={p} does not divide n={n}")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = np.random.default_rng(rng_seed)
    sets = []
    for _ in range(rounds):
        perm = rng.permutation(n)
        sets.extend(tuple(perm[b * p:(b + 1) * p].tolist()) for b in range(n // p))
    return MaskSequence(n, Scheme.LPO_BALANCED, tuple(sets))


@dataclass(frozen=True)
class BalanceReport:
    uniform_cardinality: bool
    residuals: tuple[Fraction, ...]
    max_abs_residual: Fraction

    @property
    def ok(self) -> bool:
        return self.uniform_cardinality and self.max_abs_residual == 0


def _report(uniform: bool, residuals: list[Fraction]) -> BalanceReport:
    return BalanceReport(uniform, tuple(residuals), max((abs(r) for r in residuals), default=Fraction(0)))


def verify_mask_property(masks: MaskSequence) -> BalanceReport:
    """Residuals ``(1/K) sum_j 1{l in V_j} - n_V/n`` for every index l.

    With unequal validation sizes the mean size stands in for ``n_V`` and the
    report is flagged non-uniform.
    """
    K, n = masks.K, masks.n
    counts = masks.membership.sum(axis=0)
    n_V = Fraction(sum(masks.sizes), K)
    residuals = [Fraction(int(c), K) - n_V / n for c in counts]
    return _report(masks.uniform, residuals)


def verify_train_balance(masks: MaskSequence) -> BalanceReport:
    """Residuals ``(1/K) sum_j 1{l in T_j}/n_T - 1/n`` for every index l."""
    K, n = masks.K, masks.n
    train_sizes = [n - s for s in masks.sizes]
    if min(train_sizes) == 0:
        raise ValueError("a training set is empty; the training balance is undefined")
    in_train = ~masks.membership
    sizes = np.asarray(train_sizes)
    # group masks by training size so the exact sum is a handful of Fractions per index
    per_size = {int(s): in_train[sizes == s].sum(axis=0) for s in np.unique(sizes)}
    residuals = []
    for l in range(n):
        acc = sum(Fraction(int(c[l]), s) for s, c in per_size.items())
        residuals.append(acc / K - Fraction(1, n))
    return _report(len(set(train_sizes)) == 1, residuals)
