"""Command-line interface: simulate / equilibrium / fisher-map / summarize.

Exit codes: 0 success, 1 config or validation error, 2 runtime/numerical error.
``--config`` accepts a filesystem path or the name of a shipped preset
(``paper_table1_alg1``, ``paper_table1_alg2``).
"""
from __future__ import annotations

import functools
import os
from dataclasses import replace
from importlib.resources import as_file, files

import click
import numpy as np

from .boxopt import grid_points
from .fisher import criterion_map
from .harness import (
    ensure_dir,
    export_bias,
    export_error_series,
    export_fisher_map,
    export_trajectories,
    import_trajectories,
    load_config,
    normality_diagnostics,
    relative_error_series,
    run_experiment,
    summarize_bias,
)
from .loop import compute_C, stackelberg_equilibrium


def _resolve_config(name: str):
    if os.path.exists(name):
        return load_config(name)
    fname = name if name.endswith(".cfg") else name + ".cfg"
    res = files("stackinfer.presets").joinpath(fname)
    if res.is_file():
        with as_file(res) as p:
            return load_config(p)
    raise ValueError(f"config not found: {name!r} is neither a file nor a shipped preset")


def _guard(fn):
    """Map exceptions to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except np.linalg.LinAlgError as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(2)
        except (RuntimeError, ArithmeticError) as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(2)
        except (ValueError, KeyError, TypeError, OSError) as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(1)

    return wrapper


def _fmt_vec(v) -> str:
    return " ".join(format(float(x), ".17g") for x in np.atleast_1d(v))


@click.group()
def cli():
    """Active inverse Stackelberg game simulator."""


@cli.command()
@click.option("--config", "config_name", required=True, help="Config file path or preset name.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--paths", type=int, default=None, help="Override num_paths.")
@click.option("--horizon", type=int, default=None, help="Override the horizon T.")
@click.option("--criterion", type=click.Choice(["A", "D", "E"]), default=None)
@click.option("--workers", type=int, default=None, help="Worker processes (default: serial).")
@_guard
def simulate(config_name, seed, out_dir, fmt, paths, horizon, criterion, workers):
    """Run one experiment config and write the trajectory bundle."""
    ec = _resolve_config(config_name)
    overrides = {}
    if seed is not None:
        overrides["master_seed"] = seed
    if paths is not None:
        overrides["num_paths"] = paths
    if horizon is not None:
        overrides["horizon"] = horizon
    if criterion is not None:
        overrides["criterion"] = criterion
    if overrides:
        ec = replace(ec, **overrides)
    out = ensure_dir(out_dir or ec.out_dir or ".")
    runs = run_experiment(ec, workers=workers)
    dest = os.path.join(out, f"trajectories.{fmt}")
    export_trajectories(runs, dest, fmt=fmt, config=ec)
    click.echo(f"wrote {len(runs)} trajectories to {dest}")


@cli.command()
@click.option("--config", "config_name", required=True, help="Config file path or preset name.")
@_guard
def equilibrium(config_name):
    """Print the leader equilibrium and the C(theta_true) eigenvalues."""
    ec = _resolve_config(config_name)
    res = stackelberg_equilibrium(ec.theta_true, ec.game)
    eigs = np.sort(np.linalg.eigvalsh(compute_C(ec.theta_true, ec.game)))[::-1]
    click.echo(f"uL_star = {_fmt_vec(res.uL_star)}")
    click.echo(f"expected_cost = {format(res.cost, '.17g')}")
    click.echo(f"C_eigenvalues = {_fmt_vec(eigs)}")


@cli.command(name="fisher-map")
@click.option("--config", "config_name", required=True, help="Config file path or preset name.")
@click.option("--criterion", type=click.Choice(["A", "D", "E"]), default=None)
@click.option("--resolution", type=int, default=101, show_default=True)
@click.option("--out", "out_dir", default=None, help="Output directory.")
@_guard
def fisher_map(config_name, criterion, resolution, out_dir):
    """Dump the information criterion H over the leader box as CSV."""
    ec = _resolve_config(config_name)
    c = criterion or ec.criterion
    pts = grid_points(ec.game.leader_box, resolution)
    vals = criterion_map(pts, ec.theta_true, ec.game, c)
    out = ensure_dir(out_dir or ec.out_dir or ".")
    dest = os.path.join(out, "fisher_map.csv")
    export_fisher_map(pts, vals, dest)
    click.echo(f"wrote {len(pts)} grid values to {dest}")


@cli.command()
@click.option("--config", "config_name", required=True, help="Config file path or preset name.")
@click.option("--runs", "runs_path", required=True, help="Stored trajectory file (csv or json).")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@_guard
def summarize(config_name, runs_path, out_dir, fmt):
    """Bias and relative-error summaries of a stored trajectory bundle."""
    ec = _resolve_config(config_name)
    runs = import_trajectories(runs_path)
    out = ensure_dir(out_dir or ec.out_dir or ".")

    bias = summarize_bias(runs, ec.theta_true)
    bias_path = os.path.join(out, f"bias.{fmt}")
    export_bias(bias, bias_path, fmt=fmt)

    star = stackelberg_equilibrium(ec.theta_true, ec.game).uL_star
    series = relative_error_series(runs, star)
    err_path = os.path.join(out, f"errors.{fmt}")
    export_error_series(series, err_path, fmt=fmt)
    click.echo(f"wrote {bias_path} and {err_path} (uL_star = {_fmt_vec(star)})")

    try:
        reports = normality_diagnostics(bias)
    except ValueError as e:
        click.echo(f"skipped normality diagnostics: {e}")
        return
    for r in reports:
        click.echo(
            f"{r.component}: qq_correlation={r.qq_correlation:.4f} "
            f"skewness={r.skewness:.4f} excess_kurtosis={r.excess_kurtosis:.4f}"
        )


def main():
    cli(prog_name="stackinfer")


if __name__ == "__main__":
    main()
