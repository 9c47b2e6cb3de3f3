"""
report command for xmd CLI
"""
import argparse

from rich.table import Table

from ..console import console, setup_logging
from ..report import build_report, write_report
from .common import reports_errors

SUMMARY_METRICS = ("eer", "min_dcf", "accuracy", "eer_db5", "matching_S-T(O)", "matching_T-S(O)")


@reports_errors
def handle_report_command(args):
    """Summarize every run under a directory"""
    parser = argparse.ArgumentParser(prog="xmd report", description="aggregate run logs into tables")
    parser.add_argument("run_dir", help="directory searched recursively for run logs")
    parser.add_argument("--out", help="where to write report.md and report.csv (default: run_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    options = parser.parse_args(args)
    setup_logging(options.verbose)

    report = build_report(options.run_dir)
    if report.run_count == 0:
        console.print(f"📁 no runs found in {options.run_dir}")
        return 1

    markdown_path, csv_path = write_report(report, options.out or options.run_dir)
    metrics = [m for m in SUMMARY_METRICS if m in report.metric_names()]
    table = Table(title=f"{report.run_count} run(s), {len(report.groups)} setting(s)")
    for column in ("mode", "config", "seeds", *metrics):
        table.add_column(column)
    for index, group in enumerate(report.groups):
        means = group.means()
        cells = [group.mode, group.config_hash, ",".join(str(s) for s in group.seeds)]
        for metric in metrics:
            text = f"{means[metric]:.4f}" if metric in means else ""
            cells.append(f"[bold green]{text}[/]" if report.best.get(metric) == index else text)
        table.add_row(*cells)
    console.print(table)
    if report.malformed:
        console.print(f"⚠️  Skipped {report.malformed} malformed log line(s)")
    console.print(f"📁 {markdown_path}")
    console.print(f"📁 {csv_path}")
    return 0
