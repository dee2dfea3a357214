import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquannr.errors import DimensionError, DomainError, IndexCorruptionError, PredictionError
from aquannr.estimators import (
    SENTINEL_MIN,
    NnrConfig,
    NnrPredictor,
    QuantizedIndex,
    SnrSeries,
    combine,
    idw_weights,
    nearest_windows,
    nearest_windows_indexed,
    nnr_predict,
    nnr_predict_indexed,
    prune_interval,
    window_distance,
)

from conftest import brute_force_knn, brute_force_nnr


def test_window_distance_examples():
    assert window_distance((1, 2, 3), (1, 2, 3)) == 0
    assert window_distance((1, 2, 3), (1, 2, 4)) == 1
    assert window_distance((0, 0), (3, 4)) == 25


def test_window_distance_length_mismatch():
    with pytest.raises(DimensionError):
        window_distance((1, 2), (1, 2, 3))


def test_repeating_pattern_predicts_successor():
    x = [1, 2, 3, 1, 2, 3, 1, 2, 3, 1]
    assert nnr_predict(x, NnrConfig(window_m=3, k=2)) == 2.0


@pytest.mark.parametrize("m,k", [(1, 1), (3, 3), (5, 2)])
def test_constant_series(m, k):
    assert nnr_predict([4.25] * 30, NnrConfig(window_m=m, k=k)) == 4.25


def test_weighted_example_two_neighbours():
    # d1 = 1, d4 = 4, labels 10 and 20, inverse-square weights -> 16/17 and 1/17
    cfg = NnrConfig(window_m=3, k=2)
    value = combine([1.0, 4.0], [10.0, 20.0], cfg)
    assert value == pytest.approx((16 * 10 + 20) / 17, abs=1e-12)
    assert value == pytest.approx(10.588235294117647, abs=1e-12)


def test_idw_weights_sum_to_one_and_favour_nearest():
    w = idw_weights([0.5, 1.0, 3.0])
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w >= 0)
    assert w[0] > w[1] > w[2]


def test_idw_weights_reject_zero():
    with pytest.raises(DomainError):
        idw_weights([0.0, 1.0])


def test_zero_distance_uses_mean_of_exact_matches():
    cfg = NnrConfig()
    assert combine([0.0, 0.0, 2.0], [3.0, 5.0, 100.0], cfg) == 4.0


def test_too_short_series():
    with pytest.raises(PredictionError):
        nnr_predict([1.0, 2.0, 3.0], NnrConfig(window_m=3))


def test_fewer_windows_than_k_uses_all():
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    nb = nearest_windows(x, NnrConfig(window_m=3, k=10))
    assert len(nb.starts) == 2


def test_nnr_config_validation():
    with pytest.raises(DomainError):
        NnrConfig(window_m=0)
    with pytest.raises(DomainError):
        NnrConfig(k=0)
    with pytest.raises(DomainError):
        NnrConfig(idw_exponent_q=1)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-30, 30, allow_nan=False), min_size=4, max_size=60),
       st.integers(1, 4), st.integers(1, 5))
def test_naive_matches_brute_force(values, m, k):
    if len(values) < m + 1:
        values = values + [0.0] * (m + 1 - len(values))
    cfg = NnrConfig(window_m=m, k=k)
    nb = nearest_windows(values, cfg)
    expect = brute_force_knn(values, m, k)
    assert nb.starts.tolist() == [j for _, j in expect]
    np.testing.assert_allclose(nb.distances, [d for d, _ in expect], rtol=1e-12, atol=1e-12)
    assert nnr_predict(values, cfg) == pytest.approx(brute_force_nnr(values, m, k), abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-30, 30, allow_nan=False), min_size=4, max_size=80),
       st.integers(1, 4), st.integers(1, 5))
def test_indexed_matches_naive(values, m, k):
    if len(values) < m + 1:
        values = values + [0.0] * (m + 1 - len(values))
    cfg = NnrConfig(window_m=m, k=k)
    index = QuantizedIndex.from_values(values)
    assert abs(nnr_predict_indexed(index, values, cfg) - nnr_predict(values, cfg)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-30, 30, allow_nan=False), min_size=4, max_size=60))
def test_prediction_within_selected_labels(values):
    cfg = NnrConfig()
    nb = nearest_windows(values, cfg)
    p = combine(nb.distances, nb.labels, cfg)
    assert nb.labels.min() - 1e-9 <= p <= nb.labels.max() + 1e-9


def test_indexed_matches_naive_periodic_and_noisy(rng):
    cfg = NnrConfig()
    t = np.arange(3000)
    for x in (10 + 3 * np.sin(2 * np.pi * t / 37), 10 + rng.normal(0, 2, 3000),
              np.round(rng.normal(0, 1, 3000), 2)):
        index = QuantizedIndex.from_values(x)
        a = nearest_windows(x, cfg)
        b = nearest_windows_indexed(index, x, cfg)
        assert a.starts.tolist() == b.starts.tolist()
        assert b.comparisons <= a.comparisons
        assert abs(nnr_predict_indexed(index, x, cfg) - nnr_predict(x, cfg)) <= 1e-12


def test_ties_prefer_recent_windows():
    x = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]
    nb = nearest_windows(x, NnrConfig(window_m=2, k=2))
    assert nb.starts.tolist() == [4, 2]


# -- quantized index ---------------------------------------------------------------

def test_key_quantisation():
    idx = QuantizedIndex(1000)
    assert idx.key_of(12.345678) == 12345
    assert idx.key_of(-3.2) == -3200


def test_equal_values_share_bucket_in_order():
    idx = QuantizedIndex()
    for pos, v in enumerate([5.0, 7.0, 5.0, 5.0]):
        idx.insert(v, pos)
    assert idx.bucket(5000) == [0, 2, 3]
    assert idx.bucket(7000) == [1]


def test_insert_duplicate_or_skipped_position():
    idx = QuantizedIndex()
    idx.insert(1.0, 0)
    with pytest.raises(IndexCorruptionError):
        idx.insert(2.0, 0)
    with pytest.raises(IndexCorruptionError):
        idx.insert(2.0, 5)


def test_incremental_insert_matches_bulk_build(rng):
    x = rng.normal(0, 5, 500)
    inc = QuantizedIndex()
    for i, v in enumerate(x):
        inc.insert(v, i)
    bulk = QuantizedIndex.from_values(x)
    assert inc.sorted_keys.tolist() == bulk.sorted_keys.tolist()
    assert inc.sorted_positions.tolist() == bulk.sorted_positions.tolist()


def test_index_completeness(rng):
    x = rng.normal(0, 1, 300)
    idx = QuantizedIndex.from_values(x)
    buckets = idx.buckets()
    assert sum(len(b) for b in buckets.values()) == len(x)
    for pos, v in enumerate(x):
        assert pos in buckets[math.floor(v * 1000)]
    for b in buckets.values():
        assert b == sorted(b)


def test_index_must_match_series():
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    idx = QuantizedIndex.from_values(x[:4])
    with pytest.raises(IndexCorruptionError):
        nnr_predict_indexed(idx, x, NnrConfig())


# -- prune interval ------------------------------------------------------------------

def test_prune_interval_direct_substitution():
    assert prune_interval(10, 9, scale=1, guard=0) == (7, 13)
    assert prune_interval(10, 9, scale=1) == (6, 14)


def test_prune_interval_exact_match_widened():
    assert prune_interval(10.4, 0, scale=1) == (math.floor(10.4) - 1, math.ceil(10.4) + 1)


def test_prune_interval_sentinel_covers_everything(rng):
    x = rng.normal(0, 5, 200)
    lo, hi = prune_interval(float(x[-3]), SENTINEL_MIN)
    keys = QuantizedIndex.from_values(x).sorted_keys
    assert lo <= keys.min() and keys.max() <= hi
    assert prune_interval(0.0, math.inf) == (-math.inf, math.inf)


def test_prune_interval_negative_min():
    with pytest.raises(DomainError):
        prune_interval(1.0, -0.5)


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 50, allow_subnormal=False), st.floats(0, 100, allow_subnormal=False),
       st.floats(-50, 50, allow_subnormal=False))
def test_pruning_soundness(q0, current_min, other):
    # A value whose key falls outside the interval cannot start a window closer than current_min.
    lo, hi = prune_interval(q0, current_min)
    if lo <= math.floor(other * 1000) <= hi:
        return
    assert (other - q0) ** 2 > current_min


# -- streaming predictor -----------------------------------------------------------

def test_streaming_predictor_matches_batch(rng):
    x = 12 + 4 * np.sin(np.arange(400) * 0.3) + rng.normal(0, 0.3, 400)
    eager = NnrPredictor()
    lazy = NnrPredictor(lazy=True)
    for i, v in enumerate(x):
        for p in (eager, lazy):
            p.update(float(i), float(v))
        if i >= 3 and i % 17 == 0:
            expect = nnr_predict(x[:i + 1])
            assert eager.predict() == pytest.approx(expect, abs=1e-12)
            assert lazy.predict() == pytest.approx(expect, abs=1e-12)
    eager.index.verify(eager.series)
    lazy.sync_index().verify(lazy.series)


def test_predictor_ready():
    p = NnrPredictor(NnrConfig(window_m=3))
    for i in range(3):
        p.update(float(i), 1.0)
        assert not p.ready()
    p.update(3.0, 1.0)
    assert p.ready()
    assert p.predict() == 1.0


def test_series_input_accepted():
    s = SnrSeries(range(10), [1, 2, 3, 1, 2, 3, 1, 2, 3, 1])
    assert nnr_predict(s, NnrConfig(k=2)) == 2.0
