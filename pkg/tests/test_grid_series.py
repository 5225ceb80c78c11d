"""Data-model tests: validation, interleaving, level schedules, CSV round trip."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jpegiv.errors import LengthMismatch, NonFiniteValue, NonMonotonicGrid, TooShort
from jpegiv.grid_series import (
    GridSeries,
    LevelSchedule,
    interleave_merge,
    interleave_split,
    read_series_csv,
    validate,
    write_series_csv,
)


def test_validate_accepts_well_formed():
    series = GridSeries(np.array([0.0, 1.0, 2.0]), np.array([5.0, 5.0, 5.0]))
    assert validate(series) is series


def test_validate_rejects_duplicate_location():
    with pytest.raises(NonMonotonicGrid):
        GridSeries(np.array([0.0, 0.0, 2.0]), np.array([1.0, 2.0, 3.0]))


def test_validate_rejects_decreasing_location():
    with pytest.raises(NonMonotonicGrid):
        GridSeries(np.array([0.0, 2.0, 1.0]), np.array([1.0, 2.0, 3.0]))


def test_validate_rejects_length_mismatch():
    with pytest.raises(LengthMismatch):
        GridSeries(np.array([0.0, 1.0]), np.array([1.0]))


def test_validate_rejects_nonfinite():
    with pytest.raises(NonFiniteValue):
        GridSeries(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    with pytest.raises(NonFiniteValue):
        GridSeries(np.array([0.0, np.inf]), np.array([1.0, 2.0]))


def test_interleave_split_even_length():
    series = GridSeries(np.arange(4.0), np.array([10.0, 20.0, 30.0, 40.0]))
    odd, even = interleave_split(series)
    # 1-based positions 1,3 are the odd part, 2,4 the even part.
    assert odd.values.tolist() == [10.0, 30.0]
    assert even.values.tolist() == [20.0, 40.0]


def test_interleave_split_odd_length():
    series = GridSeries(np.arange(3.0), np.array([10.0, 20.0, 30.0]))
    odd, even = interleave_split(series)
    assert odd.values.tolist() == [10.0, 30.0]
    assert even.values.tolist() == [20.0]


def test_interleave_split_too_short():
    with pytest.raises(TooShort):
        interleave_split(GridSeries(np.array([0.0]), np.array([1.0])))


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**31))
def test_split_merge_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    series = GridSeries(np.cumsum(rng.uniform(0.1, 10.0, n)), rng.standard_normal(n))
    merged = interleave_merge(*interleave_split(series))
    assert np.array_equal(merged.locations, series.locations)
    assert np.array_equal(merged.values, series.values)


def test_level_schedule_dyadic_sizes():
    for exponent in range(1, 11):
        schedule = LevelSchedule.for_length(2**exponent)
        assert schedule.max_level == exponent
        assert list(schedule.level_sizes) == [2**j for j in range(1, exponent + 1)]


def test_level_schedule_general_lengths():
    for n in (2, 3, 5, 17, 100, 257):
        schedule = LevelSchedule.for_length(n)
        assert schedule.max_level == math.ceil(math.log2(n))
        assert schedule.level_sizes[-1] == n
        sizes = list(schedule.level_sizes)
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))
        for depth in range(1, schedule.max_level + 1):
            m = schedule.segment_size(depth)
            assert schedule.head_size(depth) == math.ceil(m / 2)


def test_level_schedule_rejects_out_of_range_depth():
    schedule = LevelSchedule.for_length(16)
    with pytest.raises(IndexError):
        schedule.segment_size(0)
    with pytest.raises(IndexError):
        schedule.segment_size(5)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    series = GridSeries(np.cumsum(rng.uniform(0.1, 2.0, 20)), rng.standard_normal(20))
    path = tmp_path / "series.csv"
    write_series_csv(path, series)
    back = read_series_csv(path)
    assert np.array_equal(back.locations, series.locations)
    assert np.array_equal(back.values, series.values)


def test_csv_header_optional(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("0.0,1.5\n1.0,2.5\n")
    series = read_series_csv(path)
    assert series.values.tolist() == [1.5, 2.5]


def test_csv_sort_option_is_stable(tmp_path):
    path = tmp_path / "shuffled.csv"
    path.write_text("t,u\n2.0,20.0\n0.0,1.0\n1.0,10.0\n")
    with pytest.raises(NonMonotonicGrid):
        read_series_csv(path)
    series = read_series_csv(path, sort=True)
    assert series.locations.tolist() == [0.0, 1.0, 2.0]
    assert series.values.tolist() == [1.0, 10.0, 20.0]
