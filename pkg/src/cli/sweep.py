"""
sweep command for xmd CLI
"""
import yaml
from rich.table import Table

from ..console import console
from ..experiment import SWEEP_AXES, SWEEP_METRICS, sweep
from ..errors import UsageError
from .common import command_parser, reports_errors, resolve, split_list


def sweep_table(result):
    table = Table(title=f"sweep over {result.axis}")
    table.add_column(result.axis)
    for metric in SWEEP_METRICS:
        table.add_column(f"mean {metric}", justify="right")
    table.add_column("failed", justify="right")
    for row in result.rows:
        cells = [str(row["value"])]
        for metric in SWEEP_METRICS:
            value = row[f"mean_{metric}"]
            cells.append("-" if value is None else f"{value:.4f}")
        cells.append(str(row["failed"]))
        table.add_row(*cells)
    return table


@reports_errors
def handle_sweep_command(args):
    """One full run per value and seed, tabulated"""
    parser = command_parser("sweep", "ablate one hyperparameter across seeds")
    parser.add_argument("--axis", required=True, choices=SWEEP_AXES)
    parser.add_argument("--values", required=True, help="comma-separated values (margins in degrees under cosine)")
    parser.add_argument("--seeds", default=None, help="comma-separated seeds (default: the run seed)")
    parser.add_argument("--workers", type=int, default=1, help="parallel child runs")
    options = parser.parse_args(args)
    config = resolve(options)

    values = [yaml.safe_load(v) for v in split_list(options.values)]
    if not values:
        raise UsageError("--values is empty")
    seeds = [int(s) for s in split_list(options.seeds)] if options.seeds else None

    result = sweep(config, options.axis, values, seeds=seeds, workers=max(1, options.workers))
    console.print(sweep_table(result))
    console.print(f"📁 Table: {result.table_path}")
    if result.failures:
        console.print(f"⚠️  {len(result.failures)} child run(s) failed, see sweep.jsonl")
    if len(result.failures) == len(result.values) * len(result.seeds):
        return 4
    return 0
