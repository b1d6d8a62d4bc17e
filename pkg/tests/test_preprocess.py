import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stpforecast.preprocess import (CenteringError, SegmentationSpec, center_stationary,
                                    center_transient, ensemble_mean, segment_stationary,
                                    uncenter)
from stpforecast.types import DimensionError, Ensemble, HorizonSpec, STPError

from conftest import random_ensemble


def test_mean_of_single_episode():
    ens = Ensemble(np.arange(4.0).reshape(1, 4), HorizonSpec(1, 1, 2))
    np.testing.assert_array_equal(ensemble_mean(ens).values, np.arange(4.0))


def test_mean_midpoint():
    ens = Ensemble(np.array([[1.0] * 4, [3.0] * 4]), HorizonSpec(1, 1, 2))
    np.testing.assert_array_equal(ensemble_mean(ens).values, [2, 2, 2, 2])


def test_centered_mean_vanishes_large():
    ens = random_ensemble(1, k=400, n=4, m=3, p=50, centered=False)
    centered, _ = center_transient(ens)
    assert np.max(np.abs(ensemble_mean(centered).values)) <= 1e-12


def test_constant_and_antisymmetric():
    h = HorizonSpec(2, 1, 2)
    v = np.arange(6.0)
    c, _ = center_transient(Ensemble(np.stack([v, v, v]), h))
    assert np.all(c.data == 0)
    c, mean = center_transient(Ensemble(np.stack([v, -v]), h))
    np.testing.assert_array_equal(c.data, [v, -v])
    assert np.all(mean.values == 0)


def test_round_trip_and_double_centering():
    ens = random_ensemble(2, k=7, n=2, m=2, p=3, centered=False)
    c, mean = center_transient(ens)
    back = uncenter(c, mean)
    assert np.max(np.abs(back.data - ens.data)) <= 1e-14 * np.max(np.abs(ens.data))
    with pytest.raises(CenteringError):
        center_transient(c)


def test_stationary_centering():
    const = np.tile([1.0, -2.0, 5.0], (10, 1))
    c, mean = center_stationary(const)
    assert np.all(c == 0)
    np.testing.assert_array_equal(mean.values, [1.0, -2.0, 5.0])
    v = np.array([1.0, 2.0])
    alt = np.array([v, -v] * 4)
    c, _ = center_stationary(alt)
    np.testing.assert_array_equal(c, alt)
    with pytest.raises(DimensionError):
        center_stationary(np.empty((0, 3)))


def test_stationary_centering_long_series():
    s = np.random.default_rng(0).standard_normal((16000, 16)) + 3.0
    c, _ = center_stationary(s)
    assert np.max(np.abs(c.mean(axis=0))) <= 1e-12


def brute_force_starts(length, episode, stride):
    return [s for s in range(0, length) if s % stride == 0 and s + episode <= length]


def test_cavity_counts():
    train, test = segment_stationary(np.zeros((16000, 1)), SegmentationSpec(15, 20, 10, 0.8))
    assert (train.k, test.k) == (1278, 316)


def test_single_episode_and_small_enumeration():
    s = np.arange(8.0).reshape(4, 2)
    starts = brute_force_starts(4, 4, 1)
    assert starts == [0]
    train, test = segment_stationary(s, SegmentationSpec(2, 2, 1, 0.5))
    assert train.k == 1 and test is None
    np.testing.assert_array_equal(train.data[0], s.ravel())
    assert brute_force_starts(10, 4, 3) == [0, 3, 6]


def test_episode_contents_are_snapshot_major():
    T, p = 40, 3
    s = np.arange(T * p, dtype=float).reshape(T, p)
    train, test = segment_stationary(s, SegmentationSpec(2, 3, 4, 0.6))
    starts = brute_force_starts(T, 5, 4)
    all_eps = np.concatenate([train.data, test.data])
    for ep in train.data:
        t0 = int(ep[0]) // p
        np.testing.assert_array_equal(ep, s[t0:t0 + 5].ravel())
    assert train.data[0][0] == 0 and int(train.data[1][0]) // p == 4
    assert set(int(e[0]) // p for e in all_eps) <= set(starts)


def test_series_too_short():
    with pytest.raises(DimensionError):
        segment_stationary(np.zeros((5, 1)), SegmentationSpec(3, 3, 1, 0.5))


def test_spec_validation():
    with pytest.raises(STPError):
        SegmentationSpec(1, 1, 0, 0.5)
    with pytest.raises(STPError):
        SegmentationSpec(1, 1, 1, 1.0)


@given(length=st.integers(2, 300), n=st.integers(1, 10), m=st.integers(1, 10),
       stride=st.integers(1, 12), frac=st.floats(0.05, 0.95))
@settings(max_examples=200, deadline=None)
def test_segmentation_properties(length, n, m, stride, frac):
    if n + m > length:
        with pytest.raises(DimensionError):
            segment_stationary(np.zeros((length, 1)), SegmentationSpec(n, m, stride, frac))
        return
    s = np.arange(length, dtype=float).reshape(-1, 1)
    train, test = segment_stationary(s, SegmentationSpec(n, m, stride, frac))
    starts = brute_force_starts(length, n + m, stride)
    train_starts = [int(e[0]) for e in train.data]
    test_starts = [] if test is None else [int(e[0]) for e in test.data]
    assert train_starts == starts[: len(train_starts)]
    assert set(train_starts).isdisjoint(test_starts)
    assert len(train_starts) + len(test_starts) <= len(starts)
    # no shared snapshots between train and test
    if test_starts:
        assert test_starts[0] >= train_starts[-1] + n + m
        assert test_starts == starts[starts.index(test_starts[0]):]
