from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailcv.core import (Dataset, DegenerateTailError, LabeledPoint, NormKind, TailThreshold,
                         ThresholdSource, compute_norms, exceedance_indicator,
                         order_stat_threshold, tail_rank)


def test_norm_kinds():
    assert compute_norms([[3.0, 4.0]], NormKind.L2)[0] == 5.0
    assert compute_norms([[-2.0, 1.0]], NormKind.LINF)[0] == 2.0
    assert compute_norms([[1.0, 1.0, 1.0]], "L1")[0] == 3.0


def test_norms_from_points_and_dimension_mismatch():
    pts = [LabeledPoint([3.0, 4.0], 1), LabeledPoint([0.0, 1.0], -1)]
    np.testing.assert_array_equal(compute_norms(pts), [5.0, 1.0])
    with pytest.raises(ValueError):
        compute_norms([LabeledPoint([1.0], 1), LabeledPoint([1.0, 2.0], 1)])
    with pytest.raises(ValueError):
        Dataset.from_points([LabeledPoint([1.0], 1), LabeledPoint([1.0, 2.0], 1)])


def test_labeled_point_validation():
    with pytest.raises(ValueError):
        LabeledPoint([1.0], 0)
    with pytest.raises(ValueError):
        LabeledPoint([np.nan], 1)


def test_dataset_is_read_only():
    ds = Dataset([[1.0, 0.0], [0.0, 2.0]], [1, -1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5.0
    with pytest.raises(ValueError):
        ds.norms[0] = 5.0
    np.testing.assert_array_equal(ds.norms, [1.0, 2.0])
    assert ds.n == 2 and ds.d == 2


def test_dataset_rejects_bad_labels():
    with pytest.raises(ValueError):
        Dataset([[1.0]], [2])
    with pytest.raises(ValueError):
        Dataset([[1.0], [2.0]], [1])


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    ds = Dataset(rng.standard_normal((7, 3)), rng.choice([-1, 1], size=7))
    path = tmp_path / "d.csv"
    sidecar = ds.to_csv(path)
    back = Dataset.from_csv(path)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert json.loads(sidecar.read_text()) == {"n": 7, "d": 3, "norm_kind": "L2"}
    assert path.read_text().splitlines()[0] == "x_1,x_2,x_3,y"


def test_csv_sidecar_mismatch(tmp_path):
    ds = Dataset([[1.0, 2.0]], [1])
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    path.with_suffix(".json").write_text(json.dumps({"n": 3, "d": 2, "norm_kind": "L2"}))
    with pytest.raises(ValueError):
        Dataset.from_csv(path)


def test_order_stat_threshold_examples():
    thr = order_stat_threshold([5.0, 4.0, 3.0, 2.0, 1.0], 0.4)
    assert (thr.rank_k, thr.value) == (2, 4.0)
    assert thr.source is ThresholdSource.EMPIRICAL
    thr = order_stat_threshold([7.0, 7.0, 7.0], 0.34)
    assert (thr.rank_k, thr.value) == (1, 7.0)


def test_order_stat_threshold_matches_sort():
    norms = np.random.default_rng(0).pareto(2.0, 100)
    assert order_stat_threshold(norms, 0.1).value == sorted(norms.tolist())[-10]


def test_degenerate_tail_is_an_error():
    with pytest.raises(DegenerateTailError):
        order_stat_threshold([1.0, 2.0, 3.0], 0.1)


def test_tail_rank_rounding():
    assert tail_rank(100, 0.29) == 29
    assert tail_rank(10, 0.1) == 1
    assert tail_rank(9, 0.1) == 0
    assert tail_rank(5, 0.4) == 2


def test_exceedance_indicator_strictness():
    norms = [5.0, 4.0, 3.0]
    assert exceedance_indicator(norms, 4.0, strict=True).tolist() == [True, False, False]
    assert exceedance_indicator(norms, 4.0, strict=False).tolist() == [True, True, False]
    thr = TailThreshold.true_quantile(4.0, 0.5)
    assert exceedance_indicator(norms, thr).tolist() == [True, False, False]


def test_threshold_validation():
    with pytest.raises(ValueError):
        TailThreshold(1.0, 0.0, ThresholdSource.TRUE)
    with pytest.raises(ValueError):
        TailThreshold(1.0, 0.5, ThresholdSource.EMPIRICAL)
    with pytest.raises(ValueError):
        exceedance_indicator([1.0], float("inf"))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_strict_exceedances_count_k_minus_one(n, alpha, seed):
    k = tail_rank(n, alpha)
    if k < 1:
        return
    norms = np.random.default_rng(seed).permutation(n).astype(float) + 1.0
    thr = order_stat_threshold(norms, alpha)
    assert thr.rank_k == k
    assert int(exceedance_indicator(norms, thr).sum()) == k - 1
    assert int(exceedance_indicator(norms, thr, strict=False).sum()) == k


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=40), st.floats(0.05, 1.0))
def test_threshold_is_kth_largest_with_ties(values, alpha):
    norms = [float(v) for v in values]
    k = tail_rank(len(norms), alpha)
    if k < 1:
        return
    assert order_stat_threshold(norms, alpha).value == sorted(norms, reverse=True)[k - 1]
