"""
SoftDropConnect CLI

Train, evaluate and compare masked and Bayesian networks, and run the
built-in oracle checks.
"""

import sys
from pathlib import Path
from typing import Optional, Tuple

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .evaluation.report import render_metrics_table, render_summary_table
from .harness.compare import compare_methods, sweep
from .harness.config import SWEEP_P_VALUES, ExperimentConfig, load_config
from .harness.selftest import gradient_suite, run_selftest
from .harness.trainer import evaluate, train
from .masking.masks import MASK_METHODS
from .utils.errors import SoftDropConnectError
from .utils.helpers import set_verbosity

console = Console()


def print_version(ctx, param, value):
    """Print version and exit."""
    if not value or ctx.resilient_parsing:
        return
    console.print(f"SoftDropConnect v{__version__}")
    ctx.exit()


def _fail(message: str, code: int) -> None:
    console.print(Panel(f"❌ {message}", title="Error", border_style="red"))
    sys.exit(code)


def _handle(e: Exception, action: str) -> None:
    code = e.exit_code if isinstance(e, SoftDropConnectError) else 1
    _fail(f"{action}: {e}", code)


def _load(config_path: Path, full_scale: bool, output_dir: Optional[Path] = None) -> ExperimentConfig:
    config = load_config(config_path)
    if full_scale:
        config = config.full_scale()
    if output_dir is not None:
        config = config.updated(output_dir=str(output_dir))
    return config


config_option = click.option(
    "--config",
    "-c",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Experiment config (.json, .yaml or flat key=value).",
)
full_scale_option = click.option(
    "--full-scale",
    is_flag=True,
    help="Use the full-scale protocol: 500 epochs, lr 0.001, 50k/10k/10k splits.",
)
output_option = click.option(
    "--output-dir",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    help="Override the config's output directory.",
)


@click.group()
@click.option(
    "--version",
    is_flag=True,
    expose_value=False,
    is_eager=True,
    callback=print_version,
    help="Show version and exit.",
)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose output.",
)
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """
    SoftDropConnect - uncertainty estimation with stochastic masking.

    Trains Dropout, DropConnect, SoftDropConnect and Bayes-by-Backprop
    networks and measures Monte-Carlo predictive uncertainty.
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    set_verbosity(verbose)


@cli.command("train")
@config_option
@full_scale_option
@output_option
def train_command(config_path: Path, full_scale: bool, output_dir: Optional[Path]) -> None:
    """Train one experiment and write its checkpoint."""
    try:
        config = _load(config_path, full_scale, output_dir)
        result = train(config)
        last = result.epochs[-1]
        console.print(Panel(
            f"✅ Trained {config.run_name} for {len(result.epochs)} epochs "
            f"(loss {last.train_loss:.4f}, train accuracy {last.train_accuracy:.4f})\n"
            f"Checkpoint: {result.checkpoint}",
            title="Success",
            border_style="green",
        ))
    except Exception as e:
        _handle(e, "Training failed")


@cli.command("eval")
@config_option
@click.option(
    "--checkpoint",
    "-k",
    "checkpoint_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Checkpoint to evaluate (defaults to the run directory's).",
)
@full_scale_option
@output_option
def eval_command(
    config_path: Path, checkpoint_path: Optional[Path], full_scale: bool, output_dir: Optional[Path]
) -> None:
    """Monte-Carlo evaluation of a trained checkpoint."""
    try:
        config = _load(config_path, full_scale, output_dir)
        result = evaluate(config, checkpoint_path)
        console.print(render_metrics_table(result.metrics, title=f"Evaluation of {config.run_name}"))
        console.print(Panel(
            f"✅ Results written to {result.run_dir}",
            title="Success",
            border_style="green",
        ))
    except Exception as e:
        _handle(e, "Evaluation failed")


@cli.command("compare")
@click.option(
    "--configs",
    "config_paths",
    multiple=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Config of one run; further paths may follow it or repeat the option.",
)
@click.argument(
    "more_configs",
    nargs=-1,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option("--workers", "-w", type=int, default=1, show_default=True, help="Runs trained concurrently.")
@full_scale_option
@output_option
def compare_command(
    config_paths: Tuple[Path, ...],
    more_configs: Tuple[Path, ...],
    workers: int,
    full_scale: bool,
    output_dir: Optional[Path],
) -> None:
    """Train, evaluate and tabulate several runs."""
    paths = config_paths + more_configs
    if not paths:
        raise click.UsageError("compare needs at least one config (--configs <paths...>)")
    try:
        configs = [_load(path, full_scale) for path in paths]
        report = compare_methods(configs, workers=workers, output_dir=output_dir)
        console.print(render_summary_table(report.rows))
        console.print(Panel(
            f"✅ Compared {len(configs)} runs",
            title="Success",
            border_style="green",
        ))
    except Exception as e:
        _handle(e, "Comparison failed")


@cli.command("sweep")
@config_option
@click.option(
    "--method",
    "-m",
    "methods",
    multiple=True,
    type=click.Choice(("none",) + MASK_METHODS + ("bbb",)),
    help="Method to include (default: every masking method).",
)
@click.option("--p", "p_values", multiple=True, type=float, help=f"Leave-out rate (default: {SWEEP_P_VALUES}).")
@click.option("--seed", "seeds", multiple=True, type=int, help="Seed to run (default: the config's).")
@click.option("--workers", "-w", type=int, default=1, show_default=True, help="Runs trained concurrently.")
@full_scale_option
def sweep_command(
    config_path: Path,
    methods: Tuple[str, ...],
    p_values: Tuple[float, ...],
    seeds: Tuple[int, ...],
    workers: int,
    full_scale: bool,
) -> None:
    """Sweep methods over leave-out rates."""
    try:
        config = _load(config_path, full_scale)
        report = sweep(
            config,
            methods=methods or MASK_METHODS,
            p_values=p_values or SWEEP_P_VALUES,
            seeds=list(seeds) or None,
            workers=workers,
        )
        console.print(render_summary_table(report.rows, title="Leave-out rate sweep"))
    except Exception as e:
        _handle(e, "Sweep failed")


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of inputs and frozen noise.")
@click.option("--max-coords", type=int, default=40, show_default=True, help="Coordinates per parameter.")
def gradcheck(seed: int, max_coords: int) -> None:
    """Finite-difference check of every layer's gradients."""
    try:
        reports = gradient_suite(seed=seed, max_coords=max_coords)
    except Exception as e:
        _handle(e, "Gradient check failed")
        return

    table = Table(title="Gradient check")
    table.add_column("Case", style="cyan")
    table.add_column("Coordinates", justify="right")
    table.add_column("Kinks skipped", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Result")
    for name, report in reports.items():
        table.add_row(
            name,
            str(sum(p.checked for p in report.parameters)),
            str(sum(p.skipped_kinks for p in report.parameters)),
            f"{report.max_relative_error:.2e}",
            "[green]pass[/green]" if report.passed else "[red]FAIL[/red]",
        )
    console.print(table)

    failed = [name for name, report in reports.items() if not report.passed]
    if failed:
        _fail(f"Gradient mismatch in {', '.join(failed)}", 4)


@cli.command()
def selftest() -> None:
    """Run the closed-form oracle checks."""
    try:
        results = run_selftest()
    except Exception as e:
        _handle(e, "Selftest failed")
        return

    table = Table(title="Selftest")
    table.add_column("Check", style="cyan")
    table.add_column("Expected")
    table.add_column("Actual")
    table.add_column("Result")
    for result in results:
        table.add_row(
            result.name,
            result.expected,
            result.actual,
            "[green]pass[/green]" if result.passed else "[red]FAIL[/red]",
        )
    console.print(table)

    failed = [r.name for r in results if not r.passed]
    if failed:
        _fail(f"{len(failed)} check(s) failed: {', '.join(failed)}", 1)
    console.print(Panel(f"✅ All {len(results)} checks passed", title="Success", border_style="green"))


def main() -> None:
    """Main entry point for the CLI."""
    try:
        cli()
    except KeyboardInterrupt:
        console.print("\nInterrupted")
        sys.exit(130)
    except Exception as e:
        console.print(Panel(
            f"❌ Unexpected error: {e}",
            title="Fatal Error",
            border_style="red"
        ))
        sys.exit(1)


if __name__ == "__main__":
    main()
