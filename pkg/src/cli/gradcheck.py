"""
gradcheck command for xmd CLI
"""
import argparse

from rich.table import Table

from ..console import console, setup_logging
from ..gradients import DEFAULT_TOLERANCE, check_objectives
from .common import reports_errors


@reports_errors
def handle_gradcheck_command(args):
    """Compare reverse-mode gradients of every objective with finite differences"""
    parser = argparse.ArgumentParser(prog="xmd gradcheck", description="finite-difference gradient checks")
    parser.add_argument("--seeds", type=int, default=100, help="number of seeded problems per objective")
    parser.add_argument("--seed", type=int, default=0, help="first seed")
    parser.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    parser.add_argument("-v", "--verbose", action="store_true")
    options = parser.parse_args(args)
    setup_logging(options.verbose)

    console.print(f"🚀 Checking gradients over {options.seeds} seeds")
    summary = check_objectives(range(options.seed, options.seed + options.seeds), options.tolerance)

    table = Table(title="gradient check")
    table.add_column("objective")
    table.add_column("max rel. error", justify="right")
    table.add_column("checked", justify="right")
    table.add_column("kink skips", justify="right")
    table.add_column("", justify="center")
    for name, entry in summary.items():
        table.add_row(
            name,
            f"{entry['max_relative_error']:.2e}",
            str(entry["checked"]),
            str(entry["skipped"]),
            "✅" if entry["passed"] else "❌",
        )
    console.print(table)
    failed = [name for name, entry in summary.items() if not entry["passed"]]
    if failed:
        console.print(f"❌ Above tolerance {options.tolerance:g}: {', '.join(failed)}")
        return 4
    console.print("✅ All gradients match")
    return 0
