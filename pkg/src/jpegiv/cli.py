"""Command line entry points: transform, denoise, estimate, simulate-one, simulate."""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

import click
import numpy as np
import pandas as pd

from .denoise import PenaltyConfig, penalized_fit, select_thresholds
from .dgp import DisturbanceSpec, Dgp1Params, generate
from .errors import JpegIvError
from .estimator import TruncatedSample, iv_2sls, jpeg_iv, ols
from .grid_series import GridSeries, LevelSchedule, read_series_csv
from .lifting import (
    WaveletCoefficients,
    forward_transform,
    inverse_transform,
    transposed_inverse_transform,
)
from .montecarlo import METHODS, ExperimentPlan, run as run_plan, write_outputs


def _resolve_level(spec_text: str, n: int) -> int:
    if spec_text == "max":
        return LevelSchedule.for_length(n).max_level
    try:
        return int(spec_text)
    except ValueError as exc:
        raise click.BadParameter(f"--level must be an integer or 'max', got {spec_text!r}") from exc


def _read_coefficient_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    grid: list[float] = []
    coeff: list[float] = []
    with open(path, newline="") as handle:
        for row in csv.reader(handle):
            if not row or not row[0].strip():
                continue
            try:
                g = float(row[0])
                c = float(row[1])
            except (ValueError, IndexError):
                if not grid:
                    continue
                raise
            grid.append(g)
            coeff.append(c)
    return np.asarray(grid), np.asarray(coeff)


def _write_rows(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


@click.group()
def main() -> None:
    """Irregular-grid wavelet transforms and the truncation-proof IV estimator."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--level", "level_text", default="max", show_default=True)
@click.option(
    "--direction",
    type=click.Choice(["forward", "inverse", "trans-inverse"]),
    default="forward",
    show_default=True,
)
@click.option("--output", "output_path", required=True, type=click.Path())
def transform(input_path: str, level_text: str, direction: str, output_path: str) -> None:
    """Apply a lifting transform to a two-column CSV.

    Forward and trans-inverse read ``t,u`` rows (sorted by t if needed) and
    write ``grid,coefficient`` rows in transform layout; inverse reads that
    layout back and writes ``t,u``.  Inverting a coefficient file treats any
    odd-length synthetic slots as zero (exact storage of those values only
    exists in-process).
    """
    if direction == "inverse":
        grid, coeff = _read_coefficient_csv(input_path)
        level = _resolve_level(level_text, grid.size)
        coeffs = WaveletCoefficients(
            coefficients=coeff,
            permuted_grid=grid,
            schedule=LevelSchedule.for_length(grid.size),
            level=level,
        )
        series = inverse_transform(coeffs)
        _write_rows(output_path, ["t", "u"], zip(series.locations, series.values))
        return
    series = read_series_csv(input_path, sort=True)
    level = _resolve_level(level_text, len(series))
    if direction == "forward":
        coeffs = forward_transform(series, level)
        _write_rows(
            output_path, ["grid", "coefficient"], zip(coeffs.permuted_grid, coeffs.coefficients)
        )
    else:
        result = transposed_inverse_transform(series.values, series.locations, level)
        layout = forward_transform(series, level).permuted_grid
        _write_rows(output_path, ["grid", "coefficient"], zip(layout, result))


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--level", "level_text", default="max", show_default=True)
@click.option("--lambda", "lambda_text", default="cv", show_default=True, help="a value or 'cv'")
@click.option("--gamma", "gamma_text", default="menu", show_default=True, help="a value or 'menu'")
@click.option("--tolerance", default=1e-9, show_default=True)
@click.option("--max-iter", default=1000, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--trace", "trace_path", default=None, type=click.Path())
def denoise(
    input_path: str,
    level_text: str,
    lambda_text: str,
    gamma_text: str,
    tolerance: float,
    max_iter: int,
    output_path: str,
    trace_path: str | None,
) -> None:
    """MCP-penalized wavelet fit of a noisy ``t,u`` series."""
    series = read_series_csv(input_path, sort=True)
    level = _resolve_level(level_text, len(series))
    if lambda_text == "cv":
        menu = None if gamma_text == "menu" else (float(gamma_text),)
        config = select_thresholds(series, level, gamma_menu=menu)
    else:
        if gamma_text == "menu":
            raise click.BadParameter("--gamma menu needs --lambda cv; give a single gamma value")
        config = PenaltyConfig.uniform(float(lambda_text), float(gamma_text), level)
    result = penalized_fit(series, config, level, tolerance=tolerance, max_iter=max_iter)
    _write_rows(
        output_path,
        ["t", "u", "fitted"],
        zip(series.locations, series.values, result.fitted.values),
    )
    if trace_path is not None:
        Path(trace_path).write_text(
            json.dumps(
                {
                    "objective_trace": list(result.objective_trace),
                    "iterations": result.iterations,
                    "converged": result.converged,
                    "lambdas": list(config.lambdas),
                    "gammas": list(config.gammas),
                },
                indent=2,
            )
            + "\n"
        )


def _sample_from_frame(frame: pd.DataFrame) -> tuple[TruncatedSample, list[str]]:
    cols = list(frame.columns)
    for required in ("y1", "x1", "z"):
        if required not in cols:
            raise click.BadParameter(f"input is missing required column {required!r}")
    x_names = sorted(
        (c for c in cols if c.startswith("x") and c not in ("x1",)),
        key=lambda c: int(c[1:]) if c[1:].isdigit() else 10**9,
    )
    w_names = sorted(
        (c for c in cols if c.startswith("w")),
        key=lambda c: int(c[1:]) if c[1:].isdigit() else 10**9,
    )
    if not w_names:
        raise click.BadParameter("input needs at least one selection covariate column w1, w2, ...")
    n = len(frame)
    x_rest = np.column_stack([np.ones(n)] + [frame[c].to_numpy(float) for c in x_names])
    return TruncatedSample(
        y1=frame["y1"].to_numpy(float),
        x1=frame["x1"].to_numpy(float),
        x_rest=x_rest,
        w=np.column_stack([frame[c].to_numpy(float) for c in w_names]),
        z=frame["z"].to_numpy(float),
    ), x_names


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option(
    "--method", type=click.Choice(["ols", "iv", "jpeg-iv"]), default="jpeg-iv", show_default=True
)
@click.option("--gamma", "gamma_text", default=None, help="'oracle:<v1,v2,...>' or 'estimate'")
@click.option("--output", "output_path", required=True, type=click.Path())
def estimate(input_path: str, method: str, gamma_text: str | None, output_path: str) -> None:
    """Estimate the outcome equation from a truncated-sample CSV.

    The input needs named columns: y1 (outcome), x1 (endogenous covariate),
    x2, x3, ... (exogenous covariates), w1, w2, ... (selection covariates)
    and z (instrument).
    """
    frame = pd.read_csv(input_path)
    sample, x_names = _sample_from_frame(frame)
    design = np.column_stack([sample.x1[:, None], sample.x_rest])
    names = ["x1", "intercept"] + x_names

    bias_curve: list[dict] = []
    diagnostics: dict = {"n": len(sample), "method": method}
    if method == "ols":
        beta = ols(sample.y1, design)
    elif method == "iv":
        instruments = np.column_stack([sample.z, sample.x_rest])
        beta = iv_2sls(sample.y1, design, instruments)
    else:
        if gamma_text is None:
            raise click.BadParameter("jpeg-iv needs --gamma 'oracle:<v1,v2,...>' or 'estimate'")
        if gamma_text == "estimate":
            result = jpeg_iv(sample, gamma_mode="estimate")
        elif gamma_text.startswith("oracle:"):
            vec = np.array([float(v) for v in gamma_text[len("oracle:"):].split(",")])
            result = jpeg_iv(sample, gamma_mode="oracle", gamma=vec)
        else:
            raise click.BadParameter("--gamma must be 'oracle:<v1,v2,...>' or 'estimate'")
        beta = result.beta
        diagnostics.update(result.diagnostics)
        diagnostics["delta_first_stage"] = [float(v) for v in result.delta_first_stage]
        curve = result.bias_term_fit_1
        step = max(1, len(curve.locations) // 256)
        bias_curve = [
            {"index": float(t), "value": float(v)}
            for t, v in zip(curve.locations[::step], curve.values[::step])
        ]
    payload = {
        "coefficients": {name: float(b) for name, b in zip(names, beta)},
        "diagnostics": diagnostics,
        "bias_curve": bias_curve,
    }
    Path(output_path).write_text(json.dumps(payload, indent=2) + "\n")


def _load_config(path: str | None) -> tuple[Dgp1Params, DisturbanceSpec]:
    if path is None:
        return Dgp1Params(), DisturbanceSpec()
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
    else:
        data = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            data[key.strip()] = float(value)
    param_names = {f.name for f in fields(Dgp1Params)}
    spec_names = {f.name for f in fields(DisturbanceSpec)}
    param_kwargs, spec_kwargs = {}, {}
    for key, value in data.items():
        if key in param_names:
            param_kwargs[key] = np.asarray(value) if key == "covariance" else value
        elif key in spec_names:
            spec_kwargs[key] = value
        else:
            raise click.BadParameter(f"unknown config key {key!r}")
    return Dgp1Params(**param_kwargs), DisturbanceSpec(**spec_kwargs)


@main.command("simulate-one")
@click.option("--n", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--truncated-only", is_flag=True, default=False)
@click.option(
    "--covariate-mode",
    type=click.Choice(["gaussian", "random-mixture"]),
    default="gaussian",
    show_default=True,
)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--output", "output_path", default="-", show_default=True)
def simulate_one(
    n: int,
    seed: int,
    truncated_only: bool,
    covariate_mode: str,
    config_path: str | None,
    output_path: str,
) -> None:
    """Draw one data set and emit it as CSV (stdout with --output -)."""
    params, spec = _load_config(config_path)
    sample = generate(n, params=params, spec=spec, covariate_mode=covariate_mode, seed=seed)
    if truncated_only:
        tr = sample.truncated
        frame = pd.DataFrame({"y1": tr.y1, "x1": tr.x1})
        for k in range(1, tr.x_rest.shape[1]):
            frame[f"x{k + 1}"] = tr.x_rest[:, k]
        for k in range(tr.w.shape[1]):
            frame[f"w{k + 1}"] = tr.w[:, k]
        frame["z"] = tr.z.ravel()
    else:
        frame = sample.full
    out = sys.stdout if output_path == "-" else open(output_path, "w", newline="")
    try:
        frame.to_csv(out, index=False)
    finally:
        if out is not sys.stdout:
            out.close()


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--replications", default=200, show_default=True, type=int)
@click.option("--sizes", default="500,2000,3000,5000,8000,10000", show_default=True)
@click.option("--methods", default=",".join(METHODS), show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
def simulate(
    config_path: str | None,
    replications: int,
    sizes: str,
    methods: str,
    seed: int,
    jobs: int,
    out_dir: str,
) -> None:
    """Run the replication experiment and write table CSVs, summary, raw files."""
    params, spec = _load_config(config_path)
    plan = ExperimentPlan(
        sample_sizes=tuple(int(s) for s in sizes.split(",") if s.strip()),
        replications=replications,
        methods=tuple(m.strip() for m in methods.split(",") if m.strip()),
        base_seed=seed,
        params=params,
        disturbances=spec,
    )
    table = run_plan(plan, n_jobs=jobs)
    write_outputs(table, out_dir)
    click.echo(
        f"wrote {out_dir}: {len(table.raw)} replication rows, "
        f"{table.hard_failures} failures, {table.elapsed_seconds:.1f}s"
    )
    if table.hard_failures:
        sys.exit(1)


if __name__ == "__main__":
    try:
        main()
    except JpegIvError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
