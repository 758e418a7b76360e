from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailcv import bounds
from tailcv.bounds import BoundInputs

TOL = 1e-9


def test_bernstein_tail():
    assert bounds.bernstein_tail(100, 0.1, 0.0) == 1.0
    assert abs(bounds.bernstein_tail(100, 0.1, 1.0) - math.exp(-15 / 13)) <= TOL
    assert bounds.bernstein_tail(100, 0.1, 1.0) == pytest.approx(0.3154, abs=1e-4)
    ts = np.linspace(0.01, 5, 100)
    vals = [bounds.bernstein_tail(100, 0.1, t) for t in ts]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_bernstein_invert():
    t = bounds.bernstein_invert(100, 0.1, math.exp(-1))
    assert abs(t - (1 / 30 + math.sqrt(1 / 900 + 0.8))) <= TOL
    assert abs(t - 0.92838) <= 5e-6
    assert bounds.bernstein_invert(100, 0.1, 1 - 1e-12) < 1e-5
    with pytest.raises(ValueError):
        bounds.bernstein_invert(100, 0.1, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(10, 10**6), st.floats(0.001, 1.0), st.floats(1e-8, 0.999))
def test_invert_round_trip(n, alpha, delta):
    if n * alpha < 1:
        return
    t = bounds.bernstein_invert(n, alpha, delta)
    assert bounds.bernstein_tail(n, alpha, t) <= delta + 1e-9
    assert abs(bounds.bernstein_tail(n, alpha, t) - delta) <= 1e-9


def test_b_and_q():
    assert abs(bounds.b_of_n(100, 0.1, 1, 4) - 2 / math.sqrt(10)) <= TOL
    assert abs(bounds.q_of_n(100, 0.1, 1, 4) - (2 / math.sqrt(10) + 0.1)) <= TOL
    assert bounds.b_of_n(200, 0.1, 1, 4) == pytest.approx(bounds.b_of_n(100, 0.1, 1, 4) / math.sqrt(2))
    assert bounds.q_of_n(100, 0.1) > bounds.b_of_n(100, 0.1)
    assert bounds.q_of_n(1e12, 0.1) < 1e-5
    with pytest.raises(ValueError):
        bounds.b_of_n(100, 0.1, 1, 0)


def test_e_cv():
    assert abs(bounds.e_cv(90, 10, 0.1, 1, 4) - (2 * (1 + 4 / 3) + 5 / 9)) <= TOL
    assert bounds.e_cv(90, 10, 0.1, 1, 4) == pytest.approx(5.2222, abs=1e-4)
    assert bounds.e_cv(10, 90, 0.1, 1, 4) != bounds.e_cv(90, 10, 0.1, 1, 4)
    limit = 4 * 2 / math.sqrt(9) + 5 / 9
    assert bounds.e_cv(90, 1e15, 0.1, 1, 4) == pytest.approx(limit, abs=1e-6)


def test_theorem1():
    inp = BoundInputs(100, 90, 10, 0.1, 4, delta=0.01)
    L = math.log(100)
    expected = 2 * (1 + 4 / 3) + 5 / 9 + (2 / 3) * L + 20 * math.sqrt(0.2 * L)
    v = bounds.theorem1_radius(inp)
    assert abs(v.radius - expected) <= TOL
    assert v.radius == pytest.approx(27.487, abs=1e-3)
    assert v.coverage == pytest.approx(1 - 0.15)
    assert bounds.theorem1_radius(BoundInputs(100, 90, 10, 0.1, 4, delta=1.0)).radius == \
        pytest.approx(bounds.e_cv(90, 10, 0.1, 1, 4), abs=1e-15)


def test_e_kfold():
    assert abs(bounds.e_kfold(100, 10, 0.1, 1, 4) - (5 * math.sqrt(4) + 50 / 90)) <= TOL
    assert bounds.e_kfold(100, 10, 0.1, 1, 4) == pytest.approx(10.556, abs=1e-3)
    assert abs(bounds.e_kfold(100, 2, 0.1, 1, 4) - (5 * math.sqrt(8 / 10) + 10 / 10)) <= TOL


def test_e_kfold_versus_specialised_e_cv():
    # the simplified K-fold form and e_cv at the K-fold sizes are reported side by side
    for K in (2, 5, 10):
        specialised = bounds.e_kfold_from_e_cv(100, K, 0.1, 1, 4)
        direct = 2 * (math.sqrt(K / 10) + 4 * math.sqrt(K / (10 * (K - 1)))) + 5 * K / (10 * (K - 1))
        assert abs(specialised - direct) <= TOL
        simplified = bounds.e_kfold(100, K, 0.1, 1, 4)
        # 1 + 4/sqrt(K-1) <= 5: the simplified form is an upper bound, tight at K = 2
        if K == 2:
            assert abs(specialised - simplified) <= TOL
        else:
            assert specialised < simplified


def test_theorem2_and_e_prime():
    assert abs(bounds.e_prime_cv(90, 0.1, 1, 4) - 7.0) <= TOL
    v = bounds.theorem2_radius(BoundInputs(100, 90, 10, 0.1, 4, delta=1.0))
    assert abs(v.radius - (7.0 + 11 / 3)) <= TOL
    assert v.coverage == -17.0 and v.M5 == 1.0
    r1 = bounds.theorem2_radius(BoundInputs(100, 90, 10, 0.1, 4, delta=0.1)).radius - 7.0
    r2 = bounds.theorem2_radius(BoundInputs(100, 90, 10, 0.1, 4, delta=0.05)).radius - 7.0
    assert r2 == pytest.approx(2 * r1)


def test_e_lpo_and_corollary2():
    assert abs(bounds.e_lpo(100, 10, 0.1, 1, 4) - 7.0) <= TOL
    assert bounds.e_lpo(100, 0, 0.1, 1, 4) == pytest.approx(bounds.e_prime_cv(100, 0.1, 1, 4))
    assert bounds.e_lpo(100, 20, 0.1) > bounds.e_lpo(100, 10, 0.1)
    v = bounds.corollary2_radius(100, 10, 0.1, 4, delta=0.05)
    assert v.coverage == pytest.approx(0.25)
    assert "=0.1" in v.note and "coverage_from_theorem2" in v.note


def test_expected_z_bound():
    assert abs(bounds.expected_z_bound(10, 0.1, 1, 4) - 2.0) <= TOL
    assert bounds.expected_z_bound(40, 0.1, 1, 4) == pytest.approx(1.0)
    c, p = bounds.z_tail_bound(100, 10, 0.1, 1.0, 1, 4)
    assert c == pytest.approx(2.0) and p == pytest.approx(math.exp(-15 / 13))


def test_inputs_validation():
    with pytest.raises(ValueError):
        BoundInputs(100, 80, 10, 0.1, 4)
    with pytest.raises(ValueError):
        BoundInputs(100, 90, 10, 0.1, 4, delta=0.0)
    with pytest.raises(ValueError):
        BoundInputs(5, 4, 1, 0.1, 4)
    with pytest.raises(ValueError):
        BoundInputs.kfold(100, 3, 0.1, 4)
    assert BoundInputs.kfold(100, 5, 0.1, 4).n_V == 20
    assert BoundInputs.lpo(100, 3, 0.1, 4).n_T == 97


def test_radii_positive_and_monotone():
    ns = [100 * 2 ** (i / 10) for i in range(100)]
    deltas = np.linspace(0.001, 0.999, 100)
    for name in ("theorem1", "theorem2", "corollary1", "corollary2"):
        by_n = [_radius(name, int(round(n / 10)) * 10, 0.05) for n in ns]
        assert all(np.isfinite(by_n)) and min(by_n) > 0
        assert all(b <= a + 1e-12 for a, b in zip(by_n, by_n[1:])), name
        by_delta = [_radius(name, 1000, d) for d in deltas]
        assert all(b <= a + 1e-12 for a, b in zip(by_delta, by_delta[1:])), name


def _radius(name, n, delta):
    inp = BoundInputs.kfold(n, 10, 0.1, 4, delta=delta)
    if name == "corollary2":
        # leave-p-out at a fixed ratio p = n / 10
        return bounds.corollary2_radius(n, n // 10, 0.1, 4, delta=delta).radius
    vals = {v.formula_id: v.radius for v in bounds.all_radii(inp, K=10)}
    return vals[name]


@settings(max_examples=200, deadline=None)
@given(st.integers(20, 10**5), st.floats(0.01, 1.0), st.floats(0.5, 20), st.floats(1e-6, 0.999))
def test_radii_dominate_their_expectation_terms(n, alpha, vc, delta):
    if n * alpha < 10:
        return
    inp = BoundInputs.kfold(n - n % 5, 5, alpha, vc, delta=delta)
    assert bounds.theorem1_radius(inp).radius >= bounds.e_cv(inp.n_T, inp.n_V, alpha, 1, vc)
    assert bounds.theorem2_radius(inp).radius >= bounds.e_prime_cv(inp.n_T, alpha, 1, vc)


def test_bound_value_rejects_bad_radius():
    with pytest.raises(ValueError):
        bounds.BoundValue("x", float("inf"), 0.5, 1.0)
    assert bounds.BoundValue("x", 1.0, 0.5, 2.0).to_dict()["M"] == 2.0
