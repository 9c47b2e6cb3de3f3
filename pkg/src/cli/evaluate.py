"""
evaluate command for xmd CLI
"""
from pathlib import Path

from rich.table import Table

from ..console import console
from ..experiment import STUDENT_CHECKPOINT, evaluate, load_splits, load_student
from .common import command_parser, reports_errors, resolve


def metrics_table(report):
    """Rich table of every metric of one evaluation"""
    table = Table(title=f"{report.run_id} ({report.mode}, seed {report.seed})")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for name, value in report.metrics().items():
        table.add_row(name, f"{value:.4f}")
    return table


@reports_errors
def handle_evaluate_command(args):
    """Score a trained student on the closed and open test splits"""
    parser = command_parser("evaluate", "closed-set accuracy, open-set EER/minDCF and cross-modal matching")
    parser.add_argument("--student", help=f"full checkpoint (default: <out>/{STUDENT_CHECKPOINT})")
    options = parser.parse_args(args)
    config = resolve(options)

    splits = load_splits(config)
    bundle = load_student(config, options.student or Path(config.out_dir) / STUDENT_CHECKPOINT, splits)
    report = evaluate(config, bundle, splits, out_dir=config.out_dir)
    console.print(metrics_table(report))
    console.print(f"📁 Metrics: {Path(config.out_dir) / 'metrics.csv'}")
