"""MCP penalty, thresholding oracle, proximal solver, and CV threshold selection."""

import numpy as np
import pytest

from jpegiv.denoise import (
    PenaltyConfig,
    default_gamma_menu,
    default_lambda_grid,
    mcp_penalty,
    noise_scale,
    penalized_fit,
    select_thresholds,
    threshold,
)
from jpegiv.errors import DomainError, TooShort
from jpegiv.grid_series import GridSeries
from jpegiv.lifting import forward_transform, inverse_transform


def noisy_series(rng, n, signal=None, sigma=1.0):
    grid = np.cumsum(rng.uniform(0.5, 1.5, n))
    clean = np.zeros(n) if signal is None else signal(grid)
    return GridSeries(grid, clean + sigma * rng.standard_normal(n))


def test_mcp_penalty_zero():
    assert mcp_penalty(0.0, 1.0, 2.0) == 0.0


def test_mcp_penalty_flat_above_knee():
    lam, gamma = 0.7, 3.0
    flat = 0.5 * lam**2 * gamma
    for theta in (gamma * lam + 1e-9, 5.0, 100.0):
        assert mcp_penalty(theta, lam, gamma) == pytest.approx(flat, abs=0.0)


def test_mcp_penalty_continuous_at_knee():
    lam, gamma = 1.3, 2.5
    knee = gamma * lam
    rising = lam * knee - knee**2 / (2.0 * gamma)
    assert rising == pytest.approx(0.5 * lam**2 * gamma, rel=1e-15)
    assert mcp_penalty(knee, lam, gamma) == pytest.approx(rising, rel=1e-15)


def test_mcp_penalty_domain_errors():
    with pytest.raises(DomainError):
        mcp_penalty(-0.1, 1.0, 2.0)
    with pytest.raises(DomainError):
        mcp_penalty(0.5, -1.0, 2.0)
    with pytest.raises(DomainError):
        mcp_penalty(0.5, 1.0, 1.0)


def test_threshold_pass_through():
    assert threshold(5.0, 1.0, 2.0, 1.0) == 5.0
    assert threshold(-5.0, 1.0, 2.0, 1.0) == -5.0


def test_threshold_interior_hand_value():
    # delta=1.5, lambda=1, gamma=4, alpha=1: (1/(1-1/4))*(1.5-1) = 2/3.
    assert threshold(1.5, 1.0, 4.0, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_threshold_dead_zone():
    assert threshold(0.9, 1.0, 4.0, 1.0) == 0.0
    assert threshold(-0.5, 1.0, 2.0, 1.0) == 0.0


def test_threshold_requires_alpha_gamma_above_one():
    with pytest.raises(DomainError):
        threshold(1.0, 1.0, 2.0, 0.5)


def one_dim_objective(delta, tilde, lam, gamma, alpha):
    return 0.5 * (delta - tilde) ** 2 + mcp_penalty(abs(delta), lam, gamma) / alpha


def test_threshold_matches_brute_force():
    rng = np.random.default_rng(20240917)
    for _ in range(100):
        gamma = rng.uniform(1.1, 6.0)
        # Cap gamma*lambda so the 10^6-point grid spacing stays below the
        # 1e-5 comparison tolerance (half-spacing = 3*gamma*lam/1e6).
        lam = rng.uniform(0.05, 2.7 / gamma)
        alpha = rng.uniform(1.0 / gamma + 0.05, 3.0)
        tilde = rng.uniform(-3.0, 3.0) * gamma * lam
        grid = np.linspace(-3.0 * gamma * lam, 3.0 * gamma * lam, 10**6)
        objective = 0.5 * (grid - tilde) ** 2 + _penalty_vec(np.abs(grid), lam, gamma) / alpha
        brute = grid[np.argmin(objective)]
        ours = threshold(tilde, lam, gamma, alpha)
        assert abs(ours - brute) < 1e-5
        assert one_dim_objective(ours, tilde, lam, gamma, alpha) <= (
            one_dim_objective(brute, tilde, lam, gamma, alpha) + 1e-10
        )


def _penalty_vec(theta, lam, gamma):
    knee = gamma * lam
    return np.where(theta <= knee, lam * theta - theta**2 / (2.0 * gamma), 0.5 * lam**2 * gamma)


def test_threshold_soft_limit():
    rng = np.random.default_rng(5)
    lam, gamma = 0.8, 1e12
    for tilde in rng.uniform(-4.0, 4.0, 50):
        soft = np.sign(tilde) * max(abs(tilde) - lam, 0.0)
        assert threshold(tilde, lam, gamma, 1.0) == pytest.approx(soft, abs=1e-6)


def test_threshold_near_hard_limit():
    lam = 1.0
    gamma = 1.0 + 1e-9
    knee = gamma * lam
    for tilde in np.linspace(-4.0, 4.0, 401):
        if abs(abs(tilde) - knee) <= 1e-3:
            continue  # knot neighbourhood excluded
        out = threshold(tilde, lam, gamma, 1.0)
        if abs(tilde) > knee:
            assert out == tilde
        else:
            assert abs(out) < 1e-3


def test_penalty_config_validation():
    with pytest.raises(DomainError):
        PenaltyConfig(lambdas=(0.1, 0.2), gammas=(2.0,))
    with pytest.raises(DomainError):
        PenaltyConfig(lambdas=(-0.1,), gammas=(2.0,))
    with pytest.raises(DomainError):
        PenaltyConfig(lambdas=(0.1,), gammas=(1.0,))
    with pytest.raises(DomainError):
        PenaltyConfig(lambdas=(0.1,), gammas=(2.0,), alpha=0.4)
    uniform = PenaltyConfig.uniform(0.3, 2.0, 3)
    assert uniform.lambdas == (0.3, 0.3, 0.3)
    assert uniform.gammas == (2.0, 2.0, 2.0)


def test_penalized_fit_level_mismatch():
    rng = np.random.default_rng(6)
    series = noisy_series(rng, 16)
    with pytest.raises(DomainError):
        penalized_fit(series, PenaltyConfig.uniform(0.1, 2.0, 3), 2)


def test_penalized_fit_zero_lambda_interpolates():
    rng = np.random.default_rng(21)
    series = noisy_series(rng, 64, signal=np.sin)
    result = penalized_fit(series, PenaltyConfig.uniform(0.0, 2.0, 3), 3)
    assert np.max(np.abs(result.fitted.values - series.values)) < 1e-8


def test_penalized_fit_trace_and_consistency():
    rng = np.random.default_rng(22)
    step = lambda t: np.where(t > np.median(t), 2.0, -1.0)
    series = noisy_series(rng, 128, signal=step, sigma=0.4)
    result = penalized_fit(series, PenaltyConfig.uniform(0.25, 3.0, 4), 4)
    trace = np.array(result.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    assert result.converged
    assert result.iterations <= 1000
    roundtrip = inverse_transform(result.coefficients).values
    assert np.max(np.abs(roundtrip - result.fitted.values)) < 1e-12


def test_penalized_fit_huge_lambda_keeps_only_coarse():
    rng = np.random.default_rng(23)
    series = noisy_series(rng, 32, signal=lambda t: 0.2 * t, sigma=0.3)
    level = 2
    result = penalized_fit(
        series, PenaltyConfig.uniform(1e6, 3.0, level), level, tolerance=1e-14, max_iter=5000
    )
    base = forward_transform(series, level)
    for depth in (1, 2):
        assert np.all(result.coefficients.coefficients[base.detail_slice(depth)] == 0.0)
    # Survivors span the coarse basis columns; the limit fit is their LS projection.
    k = base.coarse_size()
    columns = np.column_stack(
        [
            inverse_transform(base.with_coefficients(np.eye(len(series))[:, j])).values
            for j in range(k)
        ]
    )
    projected = columns @ np.linalg.lstsq(columns, series.values, rcond=None)[0]
    # First-order convergence onto the projection: the relative-step stop
    # fires a little short of the exact LS solution, so this is a coarse band.
    assert np.max(np.abs(result.fitted.values - projected)) < 1e-3


def test_noise_scale_tracks_sigma():
    rng = np.random.default_rng(24)
    for sigma in (0.5, 2.0):
        series = noisy_series(rng, 512, sigma=sigma)
        assert noise_scale(series) == pytest.approx(sigma, rel=0.25)


def test_default_grids():
    rng = np.random.default_rng(25)
    series = noisy_series(rng, 64)
    grid = default_lambda_grid(series, 3)
    assert grid.shape == (30,)
    assert np.all(np.diff(grid) > 0)
    assert np.all(grid > 0)
    assert default_gamma_menu() == (1.2, 2.0, 3.0, 1e12)


def test_select_thresholds_too_short():
    with pytest.raises(TooShort):
        select_thresholds(GridSeries(np.arange(3.0), np.ones(3)), 1)


def test_select_thresholds_degenerate_grid():
    rng = np.random.default_rng(26)
    series = noisy_series(rng, 32)
    config = select_thresholds(series, 2, lambda_grid=np.array([0.37]), gamma_menu=(2.0,))
    assert config.lambdas == (0.37, 0.37)
    assert config.gammas == (2.0, 2.0)


def cv_harness(signal, seed):
    """Selected-lambda grid index of the finest level on a 12-point grid."""
    rng = np.random.default_rng(seed)
    n, level = 32, 2
    grid = np.cumsum(0.5 + rng.random(n))
    clean = np.zeros(n) if signal is None else signal(grid)
    series = GridSeries(grid, clean + (1.0 if signal is None else 0.0) * rng.standard_normal(n))
    endpoints = default_lambda_grid(series, level)
    lambdas = np.geomspace(endpoints[0], endpoints[-1], 12)
    config = select_thresholds(series, level, lambda_grid=lambdas, gamma_menu=(1e12,))
    return int(np.argmin(np.abs(lambdas - config.lambdas[0])))


def test_select_thresholds_white_noise_picks_strong_shrinkage():
    picks = [cv_harness(None, seed) for seed in range(100)]
    assert np.median(picks) >= 9  # top quartile of the 12-point grid


def test_select_thresholds_smooth_input_picks_weak_shrinkage():
    picks = [cv_harness(lambda t: t, seed) for seed in range(100)]
    assert np.median(picks) <= 2  # bottom quartile
