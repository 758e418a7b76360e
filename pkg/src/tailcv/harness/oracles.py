"""Brute-force reference computations in plain Python.

Nothing here touches the vectorized paths of :mod:`tailcv.risk`; predictions,
thresholds and sums are recomputed from the raw coordinates with loops.
"""

from __future__ import annotations

import math


def predict(w, b, x) -> int:
    r = math.sqrt(sum(v * v for v in x))
    s = sum(wi * xi for wi, xi in zip(w, x)) / r if r > 0 else 0.0
    return 1 if s > b else -1


def l2(x) -> float:
    return math.sqrt(sum(v * v for v in x))


def kth_largest(values, k: int) -> float:
    return sorted(values, reverse=True)[k - 1]


def threshold(norms, alpha: float) -> float:
    k = int(math.floor(alpha * len(norms) + 1e-9))
    return kth_largest(norms, k)


def risk(w, b, X, y, norms, S, thr: float, alpha: float) -> float:
    total = 0.0
    for i in S:
        if norms[i] > thr and predict(w, b, X[i]) != y[i]:
            total += 1.0
    return total / (alpha * len(S))


def erm(classifiers, X, y, norms, S, thr: float, alpha: float) -> tuple[int, float]:
    """``classifiers`` is a list of ``(w, b)``; lowest index wins ties."""
    best, best_risk = 0, None
    for gid, (w, b) in enumerate(classifiers):
        r = risk(w, b, X, y, norms, S, thr, alpha)
        if best_risk is None or r < best_risk:
            best, best_risk = gid, r
    return best, best_risk


def cv(classifiers, X, y, norms, validation_sets, alpha: float) -> tuple[float, list[int]]:
    n = len(X)
    thr = threshold(norms, alpha)
    vals, picks = [], []
    for V in validation_sets:
        Vs = set(V)
        T = [i for i in range(n) if i not in Vs]
        gid, _ = erm(classifiers, X, y, norms, T, thr, alpha)
        w, b = classifiers[gid]
        vals.append(risk(w, b, X, y, norms, list(V), thr, alpha))
        picks.append(gid)
    return sum(vals) / len(vals), picks


def z_statistic(classifiers, X, y, norms, validation_sets, alpha: float, t_alpha: float,
                true_risks) -> float:
    acc = 0.0
    for V in validation_sets:
        worst = 0.0
        for gid, (w, b) in enumerate(classifiers):
            dev = abs(risk(w, b, X, y, norms, list(V), t_alpha, alpha) - true_risks[gid])
            worst = max(worst, dev)
        acc += worst
    return acc / len(validation_sets)
