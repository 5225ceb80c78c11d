"""Lifting-transform tests: filters, round trips, and the dense matrix oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jpegiv.errors import LevelOutOfRange, TooLarge, ZeroGridSpacing
from jpegiv.grid_series import GridSeries, LevelSchedule
from jpegiv.lifting import (
    CONSTANTS,
    ODD_PAD,
    build_matrix_oracle,
    forward_transform,
    inverse_transform,
    lifting_filter,
    transposed_inverse_transform,
)

PI1, PI2, PI3, PI4 = CONSTANTS.pi1, CONSTANTS.pi2, CONSTANTS.pi3, CONSTANTS.pi4
PHI = CONSTANTS.phi


def random_series(rng, n, lo=0.1, hi=10.0):
    return GridSeries(np.cumsum(rng.uniform(lo, hi, n)), rng.standard_normal(n))


def test_filter_constants_fixed_values():
    assert PI1 == -1.5861343420693648
    assert PI2 == -0.0529801185718856
    assert PI3 == 0.8829110755411875
    assert PI4 == 0.4435068520511142
    assert PHI == 1.1496043988602418


def test_odd_pad_coefficients_formulas():
    denom = 1.0 + 2.0 * PI2 * PI3
    expected = (
        -2.0 * PI1 * PI2 * PI3 / denom,
        2.0 * PI2 * PI3 / denom,
        2.0 * (PI1 + PI3 + 3.0 * PI1 * PI2 * PI3) / denom,
    )
    assert ODD_PAD.phi_delta == pytest.approx(expected, abs=0.0)


def test_filter_constant_series_gives_2pi_c():
    # Weights on each output entry sum to one, so a constant c maps to 2*pi*c.
    grid = np.cumsum(np.random.default_rng(0).uniform(0.1, 5.0, 12))
    for flag in (0, 1):
        out = lifting_filter(np.full(6, 3.0), flag, 0.7, grid)
        assert out == pytest.approx(np.full(6, 2.0 * 0.7 * 3.0), rel=1e-14)


def test_filter_equispaced_weights_are_half():
    grid = np.arange(12.0)
    series = np.random.default_rng(1).standard_normal(6)
    out = lifting_filter(series, 0, 0.9, grid)
    padded = np.append(series, series[-1])
    assert out == pytest.approx(2.0 * 0.9 * 0.5 * (padded[:-1] + padded[1:]), rel=1e-14)


def test_filter_hand_weight_irregular_grid():
    # grid [0,1,3,4], odd positions {0,3}: interior weight (3-1)/(3-0) = 2/3.
    out = lifting_filter(np.array([5.0, 7.0]), 0, 0.5, np.array([0.0, 1.0, 3.0, 4.0]))
    assert out[0] == pytest.approx(2.0 * 0.5 * (2.0 / 3.0 * 5.0 + 1.0 / 3.0 * 7.0), abs=1e-14)
    assert out[1] == pytest.approx(2.0 * 0.5 * 7.0, abs=1e-14)


def test_filter_rejects_coincident_grid():
    with pytest.raises(ZeroGridSpacing):
        lifting_filter(np.array([1.0, 2.0]), 0, 0.5, np.array([0.0, 1.0, 0.0, 2.0]))


def test_forward_hand_trace_n2():
    # grid [0,1], values [1,0]: every filter sees a single element, so each
    # step collapses to s += 2*pi*d or d += 2*pi*s with boundary weights 0.5.
    s = 2.0 * PI1
    d = 1.0 + 2.0 * PI2 * s
    s = s + 2.0 * PI3 * d
    d = d + 2.0 * PI4 * s
    expected = np.array([d * PHI, s / PHI])
    coeffs = forward_transform(GridSeries(np.array([0.0, 1.0]), np.array([1.0, 0.0])), 1)
    assert coeffs.coefficients == pytest.approx(expected, rel=1e-14)


def test_round_trip_even_lengths():
    rng = np.random.default_rng(7)
    for n in (2, 4, 8, 16, 34, 64, 128, 256):
        series = random_series(rng, n)
        for level in (1, LevelSchedule.for_length(n).max_level):
            back = inverse_transform(forward_transform(series, level))
            scale = 1.0 + np.max(np.abs(series.values))
            assert np.max(np.abs(back.values - series.values)) <= 1e-10 * scale
            assert back.locations == pytest.approx(series.locations, abs=0.0)


def test_round_trip_odd_lengths_stored_synthetic():
    rng = np.random.default_rng(8)
    for n in (3, 5, 7, 13, 33, 101, 255):
        series = random_series(rng, n)
        level = LevelSchedule.for_length(n).max_level
        coeffs = forward_transform(series, level)
        assert coeffs.synthetic  # odd segments must have stored pad values
        back = inverse_transform(coeffs)
        scale = 1.0 + np.max(np.abs(series.values))
        assert np.max(np.abs(back.values - series.values)) <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=80), st.integers(min_value=0, max_value=2**31))
def test_round_trip_property(n, seed):
    rng = np.random.default_rng(seed)
    series = random_series(rng, n)
    level = rng.integers(1, LevelSchedule.for_length(n).max_level + 1)
    back = inverse_transform(forward_transform(series, int(level)))
    scale = 1.0 + np.max(np.abs(series.values))
    assert np.max(np.abs(back.values - series.values)) <= 1e-10 * scale


def test_forward_linearity():
    rng = np.random.default_rng(9)
    grid = np.cumsum(rng.uniform(0.1, 10.0, 48))
    u, v = rng.standard_normal(48), rng.standard_normal(48)
    a, b = 2.7, -0.4
    combo = forward_transform(GridSeries(grid, a * u + b * v), 4).coefficients
    parts = (
        a * forward_transform(GridSeries(grid, u), 4).coefficients
        + b * forward_transform(GridSeries(grid, v), 4).coefficients
    )
    assert combo == pytest.approx(parts, rel=1e-10, abs=1e-12)


def test_zero_maps_to_zero():
    rng = np.random.default_rng(10)
    grid = np.cumsum(rng.uniform(0.1, 10.0, 21))
    zeros = np.zeros(21)
    base = forward_transform(GridSeries(grid, rng.standard_normal(21)), 3)
    assert np.all(inverse_transform(base.with_coefficients(zeros)).values == 0.0)
    assert np.all(transposed_inverse_transform(zeros, grid, 3) == 0.0)


def assemble(apply_fn, n):
    cols = [apply_fn(np.eye(n)[:, k]) for k in range(n)]
    return np.column_stack(cols)


def test_matrix_oracle_equivalence_small_grids():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4, 7, 8, 15, 16, 33, 64):
        grid = np.cumsum(rng.uniform(0.1, 10.0, n))
        for level in range(1, LevelSchedule.for_length(n).max_level + 1):
            fwd, inv, tinv = build_matrix_oracle(grid, level)
            base = forward_transform(GridSeries(grid, np.zeros(n)), level)

            lifted_fwd = assemble(
                lambda e: forward_transform(GridSeries(grid, e), level).coefficients, n
            )
            assert np.max(np.abs(lifted_fwd - fwd)) < 1e-10

            lifted_inv = assemble(
                lambda e: inverse_transform(base.with_coefficients(e)).values, n
            )
            assert np.max(np.abs(lifted_inv - inv)) < 1e-10

            lifted_tinv = assemble(
                lambda e: transposed_inverse_transform(e, grid, level), n
            )
            assert np.max(np.abs(lifted_tinv - tinv)) < 1e-10
            assert np.max(np.abs(lifted_tinv - inv.T)) < 1e-10


def even_chain_level(n):
    """Largest depth at which every transformed segment is still even."""
    level, m = 0, n
    while m % 2 == 0 and m >= 2:
        level += 1
        m = m // 2
    return level


def test_oracle_forward_inverse_product_is_identity():
    # The dense identity only holds while no segment needs the synthetic pad:
    # dropping the pad slot in the forward product and inserting a zero in the
    # inverse product are not mutual inverses (that is the whole reason the
    # transforms carry stored synthetic values for odd lengths).
    rng = np.random.default_rng(12)
    for n in (4, 6, 12, 16, 20, 24, 32):
        grid = np.cumsum(rng.uniform(0.1, 10.0, n))
        level = even_chain_level(n)
        fwd, inv, _ = build_matrix_oracle(grid, level)
        assert np.max(np.abs(fwd @ inv - np.eye(n))) < 1e-10
        assert np.max(np.abs(inv @ fwd - np.eye(n))) < 1e-10


def test_adjoint_identity():
    rng = np.random.default_rng(13)
    for n in (16, 47, 128):
        grid = np.cumsum(rng.uniform(0.1, 10.0, n))
        level = LevelSchedule.for_length(n).max_level
        base = forward_transform(GridSeries(grid, np.zeros(n)), level)
        delta, v = rng.standard_normal(n), rng.standard_normal(n)
        lhs = float(inverse_transform(base.with_coefficients(delta)).values @ v)
        rhs = float(delta @ transposed_inverse_transform(v, grid, level))
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_level_bounds_checked():
    series = GridSeries(np.arange(8.0), np.ones(8))
    with pytest.raises(LevelOutOfRange):
        forward_transform(series, 0)
    with pytest.raises(LevelOutOfRange):
        forward_transform(series, 4)
    with pytest.raises(LevelOutOfRange):
        transposed_inverse_transform(np.ones(8), np.arange(8.0), 4)


def test_matrix_oracle_size_cap():
    with pytest.raises(TooLarge):
        build_matrix_oracle(np.arange(257.0), 1)
