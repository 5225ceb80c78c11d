"""Synthetic data generation for the truncation experiments.

The three structural disturbances (v, eps1, eps2) are coupled through a
Clayton copula (sampled by the Marshall-Olkin 1988 frailty construction) and
mapped through their marginals: v is normal, eps1 and eps2 follow a
three-part mixture 0.4 N(mu, sigma_a^2) + 0.5 N(-mu, sigma_b^2) +
0.1 Gamma(shape mu*varphi, rate varphi), which has mean zero by the weight
choice.  Covariates (z, x2, w1, w2) are multivariate normal with a fixed
covariance, or share its Gaussian copula with seeded random mixture
marginals for robustness runs.

The structural system generates a latent endogenous covariate, an outcome,
and a selection variable; rows with a negative latent selection value are
dropped, producing the endogenously truncated sample the estimators see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import ndtri

from .errors import DomainError, NonFiniteValue, SingularCovariance
from .estimator import TruncatedSample

MIXTURE_WEIGHTS = (0.4, 0.5, 0.1)

_DEFAULT_COVARIANCE = (
    (1.0, 0.4, 0.8, -0.6),
    (0.4, 1.264, 0.36, -0.48),
    (0.8, 0.36, 2.0, -0.4),
    (-0.6, -0.48, -0.4, 2.0),
)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Marginal and dependence parameters of (v, eps1, eps2)."""

    mu: float = 4.0
    sigma_a: float = 2.5
    sigma_b: float = 1.5
    varphi: float = 2.0
    sigma_v: float = 1.0
    clayton_theta: float = 1.0

    def __post_init__(self) -> None:
        if min(self.mu, self.sigma_a, self.sigma_b, self.varphi, self.sigma_v) <= 0:
            raise DomainError("mixture parameters must be positive")
        if self.clayton_theta <= 0:
            raise DomainError("clayton_theta must be positive")


@dataclass(frozen=True)
class Dgp1Params:
    """Structural coefficients and the covariate covariance of DGP 1."""

    alpha1: float = 2.0
    alpha2: float = 0.5
    beta1: float = 1.0
    beta2: float = 1.25
    delta1: float = 0.5
    delta2: float = 1.0
    gamma1: float = 2.0
    gamma2: float = -1.0
    covariance: np.ndarray = field(
        default_factory=lambda: np.array(_DEFAULT_COVARIANCE)
    )

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (4, 4) or not np.allclose(cov, cov.T):
            raise SingularCovariance("covariance must be symmetric 4x4")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("covariance is not positive definite") from exc
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class GeneratedSample:
    """One simulated data set: all latent rows plus the truncated view."""

    full: pd.DataFrame
    truncated: TruncatedSample
    seed: object
    participation_rate: float


def sample_clayton(dim: int, theta: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Clayton-copula uniforms via the gamma frailty V and U_k = (1+E_k/V)^(-1/theta)."""
    if dim < 2:
        raise DomainError("dim must be at least 2")
    if theta <= 0:
        raise DomainError("theta must be positive")
    if count < 1:
        raise DomainError("count must be positive")
    frailty = rng.gamma(1.0 / theta, 1.0, size=count)
    exponential = rng.exponential(1.0, size=(count, dim))
    uniforms = (1.0 + exponential / frailty[:, None]) ** (-1.0 / theta)
    return np.clip(uniforms, 1e-15, 1.0 - 1e-15)


def mixture_cdf(
    x: np.ndarray | float,
    spec: DisturbanceSpec,
    weights: tuple[float, float, float] = MIXTURE_WEIGHTS,
) -> np.ndarray | float:
    """CDF of the three-part disturbance mixture (gamma rate = varphi)."""
    x = np.asarray(x, dtype=float)
    shape = spec.mu * spec.varphi
    out = (
        weights[0] * stats.norm.cdf(x, loc=spec.mu, scale=spec.sigma_a)
        + weights[1] * stats.norm.cdf(x, loc=-spec.mu, scale=spec.sigma_b)
        + weights[2] * stats.gamma.cdf(x, a=shape, scale=1.0 / spec.varphi)
    )
    return out if out.ndim else float(out)


def mixture_quantile(
    p: np.ndarray | float,
    spec: DisturbanceSpec,
    weights: tuple[float, float, float] = MIXTURE_WEIGHTS,
) -> np.ndarray | float:
    """Inverse mixture CDF by bracketed bisection to 1e-10."""
    p_arr = np.asarray(p, dtype=float)
    scalar = p_arr.ndim == 0
    p_arr = np.atleast_1d(p_arr)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)) or not np.all(np.isfinite(p_arr)):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")

    gamma_mean = spec.mu
    gamma_sd = math.sqrt(spec.mu / spec.varphi)
    lo = min(-spec.mu - 10.0 * spec.sigma_b, spec.mu - 10.0 * spec.sigma_a)
    hi = max(spec.mu + 10.0 * spec.sigma_a, -spec.mu + 10.0 * spec.sigma_b,
             gamma_mean + 20.0 * gamma_sd)
    while mixture_cdf(lo, spec, weights) > p_arr.min():
        lo -= abs(lo) + 1.0
    while mixture_cdf(hi, spec, weights) < p_arr.max():
        hi += abs(hi) + 1.0

    low = np.full_like(p_arr, lo)
    high = np.full_like(p_arr, hi)
    while np.max(high - low) > 1e-10:
        mid = 0.5 * (low + high)
        below = mixture_cdf(mid, spec, weights) < p_arr
        low = np.where(below, mid, low)
        high = np.where(below, high, mid)
    result = 0.5 * (low + high)
    return float(result[0]) if scalar else result


class _MixtureMarginal:
    """A seeded finite mixture with analytic moments and a bisection quantile."""

    def __init__(self, kinds, params, weights):
        self.kinds = kinds
        self.params = params
        self.weights = weights
        mean = 0.0
        second = 0.0
        for kind, par, wgt in zip(kinds, params, weights):
            m, v = self._moments(kind, par)
            mean += wgt * m
            second += wgt * (v + m * m)
        self.mean = mean
        self.sd = math.sqrt(max(second - mean * mean, 1e-12))

    @staticmethod
    def _moments(kind, par):
        if kind == "normal":
            return par[0], par[1] ** 2
        if kind == "gamma":
            return par[0] * par[1], par[0] * par[1] ** 2
        return 0.5 * (par[0] + par[1]), (par[1] - par[0]) ** 2 / 12.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for kind, par, wgt in zip(self.kinds, self.params, self.weights):
            if kind == "normal":
                out += wgt * stats.norm.cdf(x, loc=par[0], scale=par[1])
            elif kind == "gamma":
                out += wgt * stats.gamma.cdf(x, a=par[0], scale=par[1])
            else:
                out += wgt * stats.uniform.cdf(x, loc=par[0], scale=par[1] - par[0])
        return out

    def standardized_quantile(self, p: np.ndarray, target_sd: float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo = self.mean - 12.0 * self.sd - 1.0
        hi = self.mean + 12.0 * self.sd + 1.0
        while np.any(self.cdf(lo) > p.min()):
            lo -= abs(lo) + 1.0
        while np.any(self.cdf(hi) < p.max()):
            hi += abs(hi) + 1.0
        low = np.full_like(p, lo)
        high = np.full_like(p, hi)
        for _ in range(60):
            mid = 0.5 * (low + high)
            below = self.cdf(mid) < p
            low = np.where(below, mid, low)
            high = np.where(below, high, mid)
        raw = 0.5 * (low + high)
        return (raw - self.mean) / self.sd * target_sd


def random_mixture_marginals(menu_seed: int) -> tuple[Callable[[np.ndarray, float], np.ndarray], ...]:
    """Four seeded random-mixture quantile maps, one per covariate.

    Each is a 2-4 component mixture over {normal, gamma, uniform} with
    randomized parameters and Dirichlet weights; the returned callables map
    (uniforms, target_sd) to standardized draws with mean 0 and the target
    standard deviation.
    """
    rng = np.random.default_rng(menu_seed)
    marginals = []
    for _ in range(4):
        k = int(rng.integers(2, 5))
        kinds = []
        params = []
        for _ in range(k):
            kind = ("normal", "gamma", "uniform")[int(rng.integers(0, 3))]
            if kind == "normal":
                params.append((float(rng.uniform(-3, 3)), float(rng.uniform(0.5, 2.0))))
            elif kind == "gamma":
                params.append((float(rng.uniform(1.0, 6.0)), float(rng.uniform(0.3, 1.5))))
            else:
                a = float(rng.uniform(-4, 2))
                params.append((a, a + float(rng.uniform(0.5, 5.0))))
            kinds.append(kind)
        weights = rng.dirichlet(np.ones(k))
        marginals.append(_MixtureMarginal(kinds, params, weights))
    return tuple(m.standardized_quantile for m in marginals)


def _rng_from_seed(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def generate(
    n: int,
    params: Dgp1Params | None = None,
    spec: DisturbanceSpec | None = None,
    covariate_mode: str = "gaussian",
    seed=0,
) -> GeneratedSample:
    """Simulate one data set from DGP 1 and truncate on the selection sign.

    Draw order is fixed (Clayton disturbances, then covariates, then the
    marginal menu in random-mixture mode) so a seed pins the sample exactly.
    """
    if n < 1:
        raise DomainError("n must be positive")
    if covariate_mode not in ("gaussian", "random-mixture"):
        raise DomainError(f"unknown covariate_mode {covariate_mode!r}")
    params = params or Dgp1Params()
    spec = spec or DisturbanceSpec()
    rng = _rng_from_seed(seed)

    uniforms = sample_clayton(3, spec.clayton_theta, n, rng)
    v = spec.sigma_v * ndtri(uniforms[:, 0])
    eps1 = mixture_quantile(uniforms[:, 1], spec)
    eps2 = mixture_quantile(uniforms[:, 2], spec)

    gauss = rng.standard_normal((n, 4))
    if covariate_mode == "gaussian":
        chol = np.linalg.cholesky(params.covariance)
        covariates = gauss @ chol.T
    else:
        sd = np.sqrt(np.diag(params.covariance))
        corr = params.covariance / np.outer(sd, sd)
        chol = np.linalg.cholesky(corr)
        correlated = gauss @ chol.T
        menu_seed = int(rng.integers(0, 2**63))
        quantile_maps = random_mixture_marginals(menu_seed)
        copula_uniforms = stats.norm.cdf(correlated)
        copula_uniforms = np.clip(copula_uniforms, 1e-12, 1.0 - 1e-12)
        covariates = np.column_stack(
            [qmap(copula_uniforms[:, k], sd[k]) for k, qmap in enumerate(quantile_maps)]
        )
    z, x2, w1, w2 = covariates.T

    x1_star = params.delta1 * z + params.delta2 * x2 + v
    y1_star = params.alpha1 + params.beta1 * x1_star + params.beta2 * x2 + eps1
    y2_star = params.alpha2 + params.gamma1 * w1 + params.gamma2 * w2 + eps2
    keep = y2_star >= 0.0

    full = pd.DataFrame(
        {
            "y1_star": y1_star,
            "y2_star": y2_star,
            "x1_star": x1_star,
            "z": z,
            "x2": x2,
            "w1": w1,
            "w2": w2,
            "v": v,
            "eps1": eps1,
            "eps2": eps2,
        }
    )
    kept = int(np.sum(keep))
    if kept < 3:
        raise DomainError(f"only {kept} rows survive truncation; increase n")
    truncated = TruncatedSample(
        y1=y1_star[keep],
        x1=x1_star[keep],
        x_rest=np.column_stack([np.ones(kept), x2[keep]]),
        w=np.column_stack([w1[keep], w2[keep]]),
        z=z[keep],
    )
    return GeneratedSample(
        full=full,
        truncated=truncated,
        seed=seed,
        participation_rate=kept / n,
    )
