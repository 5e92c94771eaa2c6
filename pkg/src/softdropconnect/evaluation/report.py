"""
Rendering of result tables: rich tables for the terminal, a jinja2
template for the markdown comparison report.
"""

from pathlib import Path
from typing import Any, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, StrictUndefined
from rich.table import Table

from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

TEMPLATE_DIR = Path(__file__).parent.parent / "templates"
COMPARISON_TEMPLATE = "comparison_report.md.j2"


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "–" if value is None else f"{value:.{digits}f}"


def _pm(mean: Optional[float], sd: Optional[float], digits: int = 4) -> str:
    if sd is None:
        return _fmt(mean, digits)
    return f"{_fmt(mean, digits)} ± {_fmt(sd, digits)}"


def render_summary_table(rows: Sequence[Any], title: str = "Method comparison") -> Table:
    """
    Terminal table of per-method accuracy and mutual information.

    Args:
        rows: Objects with method, p, seeds, accuracy_mean/sd, mi_mean/sd, entropy_mean
        title: Table title

    Returns:
        rich Table
    """
    table = Table(title=title)
    table.add_column("Method", style="cyan")
    table.add_column("p", justify="right")
    table.add_column("Seeds", justify="right")
    table.add_column("Accuracy", justify="right", style="green")
    table.add_column("MI (bits)", justify="right", style="magenta")
    table.add_column("Entropy (bits)", justify="right")
    for row in rows:
        table.add_row(
            row.method,
            "–" if row.p is None else f"{row.p:g}",
            str(len(row.seeds)),
            _pm(row.accuracy_mean, row.accuracy_sd),
            _pm(row.mi_mean, row.mi_sd),
            _fmt(row.entropy_mean),
        )
    return table


def render_metrics_table(records: Sequence[Any], title: str = "Evaluation") -> Table:
    """Terminal table of metric records (split, accuracy, mean MI, mean entropy)."""
    table = Table(title=title)
    table.add_column("Split", style="cyan")
    table.add_column("Accuracy", justify="right", style="green")
    table.add_column("Mean MI (bits)", justify="right", style="magenta")
    table.add_column("Mean entropy (bits)", justify="right")
    for record in records:
        table.add_row(
            record.split,
            _fmt(record.accuracy),
            _fmt(record.mean_mi_bits),
            _fmt(record.mean_entropy_bits),
        )
    return table


def render_comparison_report(report: Any) -> str:
    """Markdown comparison report rendered from the package template."""
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["fmt"] = _fmt
    env.filters["pm"] = lambda row, field: _pm(getattr(row, f"{field}_mean"), getattr(row, f"{field}_sd"))
    return env.get_template(COMPARISON_TEMPLATE).render(report=report)
