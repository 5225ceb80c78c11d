"""Replicated simulation experiments and the accuracy measures on them.

One replication draws a data set, runs every requested estimator on it, and
records the substantive coefficients (plus the first-stage coefficients for
the two-stage estimator).  Replications are seeded individually from
(base_seed, n, replication_index), so results are bit-identical across
reruns and across worker counts.  Estimator failures inside a replication
record NaN for that cell and a failure count; they never abort the run.

The summary carries three accuracy measures per method: the standardized
RMSE against the true parameter, the R_j proximity of each truncated-sample
method to the full-sample IV estimate (paired by replication), and the
convergence exponent delta fitted to standard-deviation ratios between
consecutive sample sizes.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .dgp import DisturbanceSpec, Dgp1Params, generate
from .errors import DomainError, LengthMismatch, WeakInstrument, ZeroTruth
from .estimator import iv_2sls, jpeg_iv, ols

METHODS = ("full-ols", "full-iv", "trunc-ols", "trunc-iv", "jpeg-iv")


@dataclass(frozen=True)
class ExperimentPlan:
    """What to simulate: sizes, replication count, methods, seeds, modes."""

    sample_sizes: tuple[int, ...] = (500, 2000, 3000, 5000, 8000, 10000)
    replications: int = 200
    methods: tuple[str, ...] = METHODS
    base_seed: int = 0
    gamma_mode: str = "oracle"
    covariate_mode: str = "gaussian"
    params: Dgp1Params = field(default_factory=Dgp1Params)
    disturbances: DisturbanceSpec = field(default_factory=DisturbanceSpec)

    def __post_init__(self) -> None:
        if self.replications < 2:
            raise DomainError("replications must be at least 2")
        if len(self.sample_sizes) == 0 or min(self.sample_sizes) < 1:
            raise DomainError("sample sizes must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DomainError(f"unknown methods: {sorted(unknown)}")
        if self.gamma_mode not in ("oracle", "estimate"):
            raise DomainError(f"unknown gamma_mode {self.gamma_mode!r}")
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class SummaryTable:
    """Aggregated simulation output plus the raw per-replication estimates."""

    coefficients: pd.DataFrame
    metrics: pd.DataFrame
    raw: pd.DataFrame
    plan: ExperimentPlan
    failures: dict
    elapsed_seconds: float

    @property
    def hard_failures(self) -> int:
        return int(sum(self.failures.values()))


def rmse(estimates: np.ndarray, truth: float) -> float:
    """Standardized root mean square error sqrt(mean(((b_i - b)/b)^2))."""
    estimates = np.asarray(estimates, dtype=float)
    if estimates.size == 0:
        raise LengthMismatch("rmse needs at least one estimate")
    if truth == 0.0:
        raise ZeroTruth("rmse is relative to the true value; truth must be nonzero")
    return float(np.sqrt(np.mean(((estimates - truth) / truth) ** 2)))


def relative_accuracy(truncated_estimates: np.ndarray, full_estimates: np.ndarray) -> float:
    """R_j: RMSE of truncated-sample estimates relative to paired full-sample ones.

    Pairs whose full-sample estimate is below 1e-12 in magnitude are dropped
    (the ratio is unstable there); the caller can count them via the same
    mask if it needs to report the drop.
    """
    ts = np.asarray(truncated_estimates, dtype=float)
    s = np.asarray(full_estimates, dtype=float)
    if ts.shape != s.shape:
        raise LengthMismatch("R_j needs replication-paired vectors of equal length")
    keep = np.abs(s) >= 1e-12
    if not np.any(keep):
        raise DomainError("all full-sample estimates are numerically zero")
    return float(np.sqrt(np.mean(((ts[keep] - s[keep]) / s[keep]) ** 2)))


def convergence_delta(sigma1: float, sigma2: float, n1: int, n2: int) -> float:
    """Convergence exponent delta = ln(sigma1/sigma2) / ln(n2/n1)."""
    if min(sigma1, sigma2) <= 0 or min(n1, n2) <= 0:
        raise DomainError("standard deviations and sizes must be positive")
    if n1 == n2:
        raise DomainError("sample sizes must differ")
    return float(math.log(sigma1 / sigma2) / math.log(n2 / n1))


def _one_replication(plan: ExperimentPlan, n: int, rep: int) -> dict:
    """Generate one data set and run every requested method on it."""
    record: dict = {"n": n, "rep": rep}
    for method in plan.methods:
        names = ("beta1", "beta2", "delta1", "delta2") if method == "jpeg-iv" else ("beta1", "beta2")
        for name in names:
            record[f"{method}_{name}"] = np.nan
        record[f"{method}_failed"] = False

    seed = np.random.SeedSequence((plan.base_seed, n, rep))
    try:
        sample = generate(
            n,
            params=plan.params,
            spec=plan.disturbances,
            covariate_mode=plan.covariate_mode,
            seed=seed,
        )
    except Exception:
        for method in plan.methods:
            record[f"{method}_failed"] = True
        record["participation"] = np.nan
        return record
    record["participation"] = sample.participation_rate

    full = sample.full
    y_full = full["y1_star"].to_numpy()
    design_full = np.column_stack([np.ones(n), full["x1_star"], full["x2"]])
    instruments_full = np.column_stack([np.ones(n), full["z"], full["x2"]])
    tr = sample.truncated
    design_trunc = np.column_stack([tr.x1, tr.x_rest])
    instruments_trunc = np.column_stack([tr.z, tr.x_rest])
    oracle_gamma = np.array([plan.params.gamma1, plan.params.gamma2])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakInstrument)
        for method in plan.methods:
            try:
                if method == "full-ols":
                    b = ols(y_full, design_full)
                    record["full-ols_beta1"], record["full-ols_beta2"] = b[1], b[2]
                elif method == "full-iv":
                    b = iv_2sls(y_full, design_full, instruments_full)
                    record["full-iv_beta1"], record["full-iv_beta2"] = b[1], b[2]
                elif method == "trunc-ols":
                    b = ols(tr.y1, design_trunc)
                    record["trunc-ols_beta1"], record["trunc-ols_beta2"] = b[0], b[2]
                elif method == "trunc-iv":
                    b = iv_2sls(tr.y1, design_trunc, instruments_trunc)
                    record["trunc-iv_beta1"], record["trunc-iv_beta2"] = b[0], b[2]
                else:
                    gamma = oracle_gamma if plan.gamma_mode == "oracle" else None
                    res = jpeg_iv(tr, gamma_mode=plan.gamma_mode, gamma=gamma)
                    record["jpeg-iv_beta1"] = res.beta[0]
                    record["jpeg-iv_beta2"] = res.beta[2]
                    record["jpeg-iv_delta1"] = res.delta_first_stage[0]
                    record["jpeg-iv_delta2"] = res.delta_first_stage[2]
            except Exception:
                record[f"{method}_failed"] = True
    return record


def run(plan: ExperimentPlan, n_jobs: int = 1) -> SummaryTable:
    """Execute the plan and aggregate; a pure function of the plan."""
    start = time.time()
    records: list[dict] = []
    for n in plan.sample_sizes:
        batch = Parallel(n_jobs=n_jobs)(
            delayed(_one_replication)(plan, n, rep) for rep in range(plan.replications)
        )
        records.extend(batch)
    raw = pd.DataFrame.from_records(records).sort_values(["n", "rep"]).reset_index(drop=True)

    failures = {}
    coeff_rows = []
    for method in plan.methods:
        failures[method] = int(raw[f"{method}_failed"].sum())
        names = ("beta1", "beta2", "delta1", "delta2") if method == "jpeg-iv" else ("beta1", "beta2")
        for n in plan.sample_sizes:
            sub = raw[raw["n"] == n]
            for name in names:
                vals = sub[f"{method}_{name}"].to_numpy(dtype=float)
                good = vals[np.isfinite(vals)]
                coeff_rows.append(
                    {
                        "n": n,
                        "method": method,
                        "parameter": name,
                        "mean": float(np.mean(good)) if good.size else np.nan,
                        "median": float(np.median(good)) if good.size else np.nan,
                        "std": float(np.std(good, ddof=1)) if good.size > 1 else np.nan,
                        "count": int(good.size),
                        "failures": int(sub[f"{method}_failed"].sum()),
                    }
                )
    coefficients = pd.DataFrame(coeff_rows)

    truths = {
        "beta1": plan.params.beta1,
        "beta2": plan.params.beta2,
        "delta1": plan.params.delta1,
        "delta2": plan.params.delta2,
    }
    metric_rows = []
    for method in plan.methods:
        for n in plan.sample_sizes:
            sub = raw[raw["n"] == n]
            for name in ("beta1", "beta2"):
                vals = sub[f"{method}_{name}"].to_numpy(dtype=float)
                good = vals[np.isfinite(vals)]
                if good.size and truths[name] != 0.0:
                    metric_rows.append(
                        {
                            "measure": "rmse",
                            "method": method,
                            "parameter": name,
                            "n": n,
                            "value": rmse(good, truths[name]),
                        }
                    )
    if "full-iv" in plan.methods:
        for method in ("trunc-iv", "jpeg-iv"):
            if method not in plan.methods:
                continue
            for n in plan.sample_sizes:
                sub = raw[raw["n"] == n]
                for name in ("beta1", "beta2"):
                    ts = sub[f"{method}_{name}"].to_numpy(dtype=float)
                    s = sub[f"full-iv_{name}"].to_numpy(dtype=float)
                    paired = np.isfinite(ts) & np.isfinite(s)
                    if not np.any(paired):
                        continue
                    metric_rows.append(
                        {
                            "measure": "r_j",
                            "method": method,
                            "parameter": name,
                            "n": n,
                            "value": relative_accuracy(ts[paired], s[paired]),
                        }
                    )
    stds = coefficients.set_index(["method", "parameter", "n"])["std"]
    for method in plan.methods:
        for n_prev, n_next in zip(plan.sample_sizes[:-1], plan.sample_sizes[1:]):
            try:
                s1 = float(stds[(method, "beta1", n_prev)])
                s2 = float(stds[(method, "beta1", n_next)])
            except KeyError:
                continue
            if not (np.isfinite(s1) and np.isfinite(s2)) or min(s1, s2) <= 0:
                continue
            metric_rows.append(
                {
                    "measure": "delta",
                    "method": method,
                    "parameter": "beta1",
                    "n": n_next,
                    "value": convergence_delta(s1, s2, n_prev, n_next),
                }
            )
    metrics = pd.DataFrame(metric_rows)

    return SummaryTable(
        coefficients=coefficients,
        metrics=metrics,
        raw=raw,
        plan=plan,
        failures=failures,
        elapsed_seconds=time.time() - start,
    )


def write_outputs(table: SummaryTable, out_dir: str | Path) -> None:
    """Emit the paper-style table CSVs, a JSON summary, and raw replications."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coeff = table.coefficients
    full_mask = coeff["method"].isin(["full-ols", "full-iv"])
    trunc_mask = coeff["method"].isin(["trunc-ols", "trunc-iv", "jpeg-iv"]) & coeff[
        "parameter"
    ].isin(["beta1", "beta2"])
    first_stage_mask = (coeff["method"] == "jpeg-iv") & coeff["parameter"].isin(
        ["delta1", "delta2"]
    )
    coeff[full_mask].to_csv(out / "table_b.csv", index=False)
    coeff[trunc_mask].to_csv(out / "table_c.csv", index=False)
    table.metrics.to_csv(out / "table_d.csv", index=False)
    coeff[first_stage_mask].to_csv(out / "table_e.csv", index=False)

    raw_dir = out / "raw"
    raw_dir.mkdir(exist_ok=True)
    for n in table.plan.sample_sizes:
        table.raw[table.raw["n"] == n].to_csv(raw_dir / f"replications_n{n}.csv", index=False)

    plan = table.plan
    summary = {
        "sample_sizes": list(plan.sample_sizes),
        "replications": plan.replications,
        "methods": list(plan.methods),
        "base_seed": plan.base_seed,
        "gamma_mode": plan.gamma_mode,
        "covariate_mode": plan.covariate_mode,
        "failures": table.failures,
        "hard_failures": table.hard_failures,
        "elapsed_seconds": round(table.elapsed_seconds, 3),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
