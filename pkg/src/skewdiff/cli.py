"""Batch experiment driver.

Exit codes: 0 all criteria pass, 1 criteria unmet, 2 invalid config,
3 runtime failure.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .errors import ConfigInvalid, SkewDiffError
from .experiments import (
    EXPERIMENTS,
    PLOT_KINDS,
    emit_plot_data,
    normalize_config,
    run_experiment,
)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc


def _resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get("SKEWDIFF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigInvalid(f"SKEWDIFF_THREADS={env!r} is not an integer")
    return 1


@click.group()
def main():
    """Simulation and verification experiments for skew-reflected diffusions."""


@main.command("list-experiments")
def list_experiments():
    """Print the available experiment names."""
    for name in EXPERIMENTS:
        click.echo(name)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON experiment configuration.")
def validate(config_path):
    """Validate a configuration file without running it."""
    try:
        cfg = normalize_config(_load_config(config_path))
    except ConfigInvalid as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(2)
    click.echo(f"ok: {cfg['experiment']}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="JSON experiment configuration.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=None,
              help="Worker threads (default: SKEWDIFF_THREADS or 1).")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Output directory (default: config output_dir or cwd).")
def run(config_path, seed, threads, out_dir):
    """Run an experiment and write report.json plus plot-data CSVs."""
    try:
        config = _load_config(config_path)
        if seed is not None:
            config["seed"] = seed
        n_threads = _resolve_threads(threads)
        cfg = normalize_config(config)
    except ConfigInvalid as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(2)

    out = out_dir or cfg.get("output_dir") or "."
    try:
        bundle = run_experiment(config, threads=n_threads)
    except ConfigInvalid as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(2)
    except SkewDiffError as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(3)

    os.makedirs(out, exist_ok=True)
    report = bundle["report"]
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for kind in bundle["plot_data"]:
        emit_plot_data(bundle, kind, out)

    for crit in report["criteria"]:
        status = "PASS" if crit["passed"] else "FAIL"
        click.echo(f"[{status}] {crit['name']} (tolerance: {crit['tolerance']}) "
                   f"-- {crit['detail']}")
    if report["passed"]:
        click.echo("all criteria passed")
        sys.exit(0)
    click.echo("criteria unmet", err=True)
    sys.exit(1)


if __name__ == "__main__":
    main()
