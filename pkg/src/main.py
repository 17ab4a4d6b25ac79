#!/usr/bin/env python3
"""
Main entry point for the shift audit toolkit
"""

import sys
from pathlib import Path
from typing import Optional, Sequence

# Add the src directory to the Python path
sys.path.insert(0, str(Path(__file__).parent))

import click
from loguru import logger
from rich.console import Console
from rich.table import Table

from core.audit import build_report, collect_runs
from core.config import config_reference, load_config, save_resolved
from core.errors import ConfigError, ShiftAuditError
from core.reporting import write_audit_report, write_sweep, write_theory_curve
from core.sweeps import run_sweep
from core.theory import TheoryParams, max_closed_form_deviation, theory_curve
from utils.logger import setup_logging

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

DEFAULT_TAU_GRID = "0,0.5,1,1.5,2,2.5,3,3.5,4"

console = Console()


def _fail(error: Exception) -> int:
    code = EXIT_CONFIG if isinstance(error, ConfigError) else EXIT_RUNTIME
    logger.error(f"{type(error).__name__}: {error}")
    click.echo(f"error: {error}", err=True)
    return code


def _setup(ctx: click.Context, output_dir: Optional[Path] = None):
    setup_logging(ctx.obj["log_level"], output_dir / "logs" if output_dir else None)


def _parse_grid(raw: str) -> Sequence[float]:
    try:
        grid = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {raw!r}")
    if not grid:
        raise click.BadParameter("the grid needs at least one value")
    return grid


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--verbose", "-v", is_flag=True, help="Shortcut for --log-level DEBUG")
@click.pass_context
def cli(ctx: click.Context, log_level: str, verbose: bool):
    """Black-box distribution-shift audits of trained models"""
    ctx.ensure_object(dict)
    ctx.obj["log_level"] = "DEBUG" if verbose else log_level
    setup_logging(ctx.obj["log_level"])


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Process pool size")
@click.option("--output-dir", type=click.Path(path_type=Path), default=None, help="Overrides [experiment].output_dir")
@click.pass_context
def audit(ctx: click.Context, config_path: Path, workers: Optional[int], output_dir: Optional[Path]):
    """Run the control/shifted experiment and write report.json, scores.csv, summary.txt"""
    try:
        config = load_config(config_path)
        output_dir = output_dir or config.output_dir
        _setup(ctx, output_dir)
        audit_cfg = config.audit_config(workers)
        save_resolved(config, output_dir)

        runs = collect_runs(audit_cfg)
        report = build_report(audit_cfg, runs.control, runs.shifted, scorer="attack")
        naive = build_report(audit_cfg, runs.control, runs.shifted, scorer="naive")
        write_audit_report(report, naive, output_dir, config.experiment.name, audit_cfg.seed)
    except (ShiftAuditError, OSError) as e:
        sys.exit(_fail(e))

    table = Table(title=f"Audit: {config.experiment.name} ({report.statistic})")
    for column in ("scorer", "control mean", "shifted mean", "threshold", "TPR", "AUC"):
        table.add_column(column)
    for r in (report, naive):
        table.add_row(
            r.scorer, _fmt(r.control_mean_sd[0]), _fmt(r.shifted_mean_sd[0]),
            _fmt(r.threshold), _fmt(r.tpr_at_percentile), _fmt(r.auc_roc),
        )
    console.print(table)
    sys.exit(EXIT_OK)


@cli.command()
@click.option("--epsilon", type=click.FloatRange(min=0.0, min_open=True), default=0.001, show_default=True)
@click.option("--n-train", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--tau-grid", default=DEFAULT_TAU_GRID, show_default=True, help="Comma-separated tau values")
@click.option("--trials", type=click.IntRange(min=1), default=100_000, show_default=True,
              help="Simulated attack trials per tau for the closed-form check")
@click.option("--resamples", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--pi-tr", type=click.FloatRange(0.0, 1.0), default=0.9, show_default=True)
@click.option("--pi-te", type=click.FloatRange(0.0, 1.0), default=0.6, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), default=Path("theory_curve.csv"), show_default=True)
@click.pass_context
def theory(ctx, epsilon, n_train, tau_grid, trials, resamples, pi_tr, pi_te, seed, output):
    """Closeness-probability curve plus the closed-form-vs-simulation check"""
    grid = _parse_grid(tau_grid)
    try:
        params = TheoryParams(0.0, epsilon, n_train, pi_tr, pi_te)
    except ValueError as e:
        raise click.BadParameter(str(e))

    try:
        rows = theory_curve(epsilon, n_train, grid, seed, n_resamples=resamples)
        write_theory_curve(rows, output)
        deviation = max_closed_form_deviation(params, grid, trials, seed)
    except (ShiftAuditError, OSError) as e:
        sys.exit(_fail(e))

    bound = 3.0 * (0.25 / trials) ** 0.5
    click.echo(f"wrote {len(rows)} rows to {output}")
    click.echo(f"max |simulated - closed form| = {deviation!r} (3 standard errors = {bound!r})")
    if deviation > bound:
        logger.warning("Closed-form deviation exceeds 3 standard errors")
    sys.exit(EXIT_OK)


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Process pool size")
@click.option("--output-dir", type=click.Path(path_type=Path), default=None, help="Overrides [experiment].output_dir")
@click.pass_context
def sweep(ctx: click.Context, config_path: Path, workers: Optional[int], output_dir: Optional[Path]):
    """Run one audit per [sweep] grid value; write summary.csv/json and raw_scores.jsonl"""
    try:
        config = load_config(config_path)
        output_dir = output_dir or config.output_dir
        _setup(ctx, output_dir)
        spec = config.sweep_spec(workers)
        save_resolved(config, output_dir)
        result = run_sweep(spec)
        write_sweep(result, output_dir)
    except (ShiftAuditError, OSError) as e:
        sys.exit(_fail(e))

    table = Table(title=f"Sweep over {result.axis}")
    for column in ("value", "status", "control mean", "shifted mean", "AUC", "TPR", "gen. gap"):
        table.add_column(column)
    for row in result.rows:
        table.add_row(
            str(row.value), row.status, _fmt(row.control_mean), _fmt(row.shifted_mean),
            _fmt(row.auc_roc), _fmt(row.tpr_at_percentile), _fmt(row.generalization_gap),
        )
    console.print(table)
    if result.failed:
        click.echo(f"warning: {result.failed} sweep cell(s) failed", err=True)
    sys.exit(EXIT_OK)


@cli.command("validate-config")
@click.argument("config_path", type=click.Path(path_type=Path))
def validate_config(config_path: Path):
    """Check a config file without running anything"""
    try:
        config = load_config(config_path)
        config.audit_config()
        if "sweep" in config.model_fields_set:
            config.sweep_spec()
    except ShiftAuditError as e:
        sys.exit(_fail(e))
    click.echo(f"{config_path}: ok")
    sys.exit(EXIT_OK)


@cli.command("config-reference")
def config_reference_cmd():
    """Print every configuration key with type, default and description"""
    click.echo(config_reference())


def main():
    """Main application entry point"""
    cli(obj={})


if __name__ == "__main__":
    main()
