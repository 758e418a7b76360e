"""Deviation bounds for the CV estimate of the rare-region risk.

The universal constants ``M`` and ``M5`` are unknown; they are explicit
inputs (default 1) and are echoed in every serialized value.  Radii are
therefore only as meaningful as those stand-ins.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


def _check_positive(**kw) -> None:
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def _log_inv(delta: float) -> float:
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return math.log(1.0 / delta)


@dataclass(frozen=True)
class BoundInputs:
    n: int
    n_T: int
    n_V: int
    alpha: float
    vc: float
    M: float = 1.0
    M5: float = 1.0
    delta: float = 0.05

    def __post_init__(self):
        _check_positive(n=self.n, n_T=self.n_T, n_V=self.n_V, vc=self.vc, M=self.M, M5=self.M5)
        _check_alpha(self.alpha)
        _log_inv(self.delta)
        if self.n_T + self.n_V != self.n:
            raise ValueError(f"n_T + n_V = {self.n_T + self.n_V} != n = {self.n}")
        if self.n * self.alpha < 1:
            raise ValueError("n * alpha must be >= 1")

    @classmethod
    def kfold(cls, n: int, K: int, alpha: float, vc: float, **kw) -> "BoundInputs":
        if K < 2 or n % K:
            raise ValueError(f"K-fold inputs need K >= 2 dividing n, got n={n}, K={K}")
        return cls(n, n - n // K, n // K, alpha, vc, **kw)

    @classmethod
    def lpo(cls, n: int, p: int, alpha: float, vc: float, **kw) -> "BoundInputs":
        return cls(n, n - p, p, alpha, vc, **kw)


@dataclass(frozen=True)
class BoundValue:
    formula_id: str
    radius: float
    coverage: float
    M: float
    M5: float | None = None
    note: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"{self.formula_id}: radius must be finite and positive, got {self.radius}")

    def to_dict(self) -> dict:
        return asdict(self)


def bernstein_tail(n: int, alpha: float, t: float) -> float:
    """``exp(-n alpha t^2 / (2 (4 + t/3)))``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return math.exp(-n * alpha * t * t / (2.0 * (4.0 + t / 3.0)))


def bernstein_invert(n: int, alpha: float, delta: float) -> float:
    """Smallest ``t`` with ``bernstein_tail(n, alpha, t) <= delta``.

    Positive root of ``n alpha t^2 - (2L/3) t - 8L = 0`` with ``L = log(1/delta)``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    L = math.log(1.0 / delta)
    k = n * alpha
    a = L / (3.0 * k)
    return a + math.sqrt(a * a + 8.0 * L / k)


def b_of_n(n: float, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    _check_positive(n=n, M=M, vc=vc)
    _check_alpha(alpha)
    return M * math.sqrt(vc) / math.sqrt(alpha * n)


def q_of_n(n: float, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    return b_of_n(n, alpha, M, vc) + 1.0 / (n * alpha)


def e_cv(n_T: float, n_V: float, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    _check_positive(n_T=n_T, n_V=n_V, M=M, vc=vc)
    _check_alpha(alpha)
    return (M * math.sqrt(vc) * (1.0 / math.sqrt(n_V * alpha) + 4.0 / math.sqrt(n_T * alpha))
            + 5.0 / (n_T * alpha))


def _exponential_remainder(n: int, alpha: float, delta: float) -> float:
    L = _log_inv(delta)
    na = n * alpha
    return 20.0 / (3.0 * na) * L + 20.0 * math.sqrt(2.0 / na * L)


def theorem1_radius(inputs: BoundInputs) -> BoundValue:
    """Exponential bound for any balanced mask sequence, coverage ``1 - 15 delta``."""
    i = inputs
    r = e_cv(i.n_T, i.n_V, i.alpha, i.M, i.vc) + _exponential_remainder(i.n, i.alpha, i.delta)
    return BoundValue("theorem1", r, 1.0 - 15.0 * i.delta, i.M)


def e_kfold(n: int, K: int, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    if K < 2:
        raise ValueError("K-fold needs K >= 2")
    _check_positive(n=n, M=M, vc=vc)
    _check_alpha(alpha)
    na = n * alpha
    return 5.0 * M * math.sqrt(vc * K / na) + 5.0 * K / ((K - 1) * na)


def e_kfold_from_e_cv(n: int, K: int, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    """``e_cv`` at the K-fold sizes ``n_T = n (K-1)/K``, ``n_V = n/K``, before simplification."""
    return e_cv(n * (K - 1) / K, n / K, alpha, M, vc)


def corollary1_radius(n: int, K: int, alpha: float, vc: float, M: float = 1.0,
                      delta: float = 0.05) -> BoundValue:
    r = e_kfold(n, K, alpha, M, vc) + _exponential_remainder(n, alpha, delta)
    return BoundValue("corollary1", r, 1.0 - 15.0 * delta, M)


def e_prime_cv(n_T: float, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    _check_positive(n_T=n_T, M=M, vc=vc)
    _check_alpha(alpha)
    return 9.0 * M * math.sqrt(vc) / math.sqrt(alpha * n_T) + 9.0 / (n_T * alpha)


def _polynomial_remainder(n_T: float, alpha: float, M: float, vc: float, M5: float,
                          delta: float) -> float:
    _log_inv(delta)
    return (5.0 * M * math.sqrt(vc) + M5) / (delta * math.sqrt(n_T * alpha))


def theorem2_radius(inputs: BoundInputs) -> BoundValue:
    """Polynomial bound depending on the training size only, coverage ``1 - 18 delta``."""
    i = inputs
    r = e_prime_cv(i.n_T, i.alpha, i.M, i.vc) + _polynomial_remainder(
        i.n_T, i.alpha, i.M, i.vc, i.M5, i.delta)
    return BoundValue("theorem2", r, 1.0 - 18.0 * i.delta, i.M, i.M5)


def e_lpo(n: int, p: int, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    if not 0 <= p < n:
        raise ValueError(f"need 0 <= p < n, got p={p}, n={n}")
    _check_positive(M=M, vc=vc)
    _check_alpha(alpha)
    k = (n - p) * alpha
    return 9.0 * M * math.sqrt(vc / k) + 9.0 / k


def corollary2_radius(n: int, p: int, alpha: float, vc: float, M: float = 1.0, M5: float = 1.0,
                      delta: float = 0.05) -> BoundValue:
    """Leave-p-out polynomial bound.

    The stated coverage is ``1 - 15 delta`` although the parent polynomial
    bound gives ``1 - 18 delta``; both are reported, the stated one as
    ``coverage`` and the other in ``note``.
    """
    r = e_lpo(n, p, alpha, M, vc) + _polynomial_remainder(n - p, alpha, M, vc, M5, delta)
    return BoundValue("corollary2", r, 1.0 - 15.0 * delta, M, M5,
                      note=f"coverage_from_theorem2={round(1.0 - 18.0 * delta, 12)!r}")


def expected_z_bound(n_V: float, alpha: float, M: float = 1.0, vc: float = 1.0) -> float:
    """Upper bound on the mean fold-wise supremum deviation of the pseudo-risk."""
    return b_of_n(n_V, alpha, M, vc)


def z_tail_bound(n: int, n_V: int, alpha: float, t: float, M: float = 1.0,
                 vc: float = 1.0) -> tuple[float, float]:
    """``(centering, probability)`` with ``P(Z - centering >= t) <= probability``."""
    return expected_z_bound(n_V, alpha, M, vc), bernstein_tail(n, alpha, t)


def all_radii(inputs: BoundInputs, K: int | None = None, p: int | None = None) -> list[BoundValue]:
    """Every applicable radius for one set of inputs; K-fold / l.p.o. corollaries when asked."""
    out = [theorem1_radius(inputs), theorem2_radius(inputs)]
    if K is not None:
        out.append(corollary1_radius(inputs.n, K, inputs.alpha, inputs.vc, inputs.M, inputs.delta))
    if p is not None:
        out.append(corollary2_radius(inputs.n, p, inputs.alpha, inputs.vc, inputs.M, inputs.M5,
                                     inputs.delta))
    return out
