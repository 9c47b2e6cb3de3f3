"""
Aggregate the JSONL logs under a directory into comparison tables
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.evaluation import MetricsReport, write_metrics_csv
from src.storage import read_jsonl

logger = logging.getLogger(__name__)

RUN_LOG_NAME = "log.jsonl"
LOWER_IS_BETTER = ("eer", "min_dcf", "teacher_eer", "eer_hard", "shifted_eer", "shifted_min_dcf", "val_eer")


@dataclass
class ReportGroup:
    """Runs sharing a config hash (seeds of one setting)"""

    config_hash: str
    mode: str
    runs: list = field(default_factory=list)

    @property
    def seeds(self):
        return sorted(run.seed for run in self.runs)

    def means(self):
        names = []
        for run in self.runs:
            names.extend(name for name in run.metrics() if name not in names)
        return {
            name: float(np.mean([run.metrics()[name] for run in self.runs if name in run.metrics()]))
            for name in names
        }


@dataclass
class Report:
    groups: list = field(default_factory=list)
    malformed: int = 0
    best: dict = field(default_factory=dict)

    @property
    def run_count(self):
        return sum(len(group.runs) for group in self.groups)

    def metric_names(self):
        names = []
        for group in self.groups:
            names.extend(name for name in group.means() if name not in names)
        return names


def is_better(metric, candidate, incumbent):
    if metric in LOWER_IS_BETTER or metric.startswith(("eer_", "min_dcf_")):
        return candidate < incumbent
    return candidate > incumbent


def collect_runs(root):
    """Last metrics record of every run log under root, plus the malformed line count"""
    runs, malformed = [], 0
    for path in sorted(Path(root).rglob(RUN_LOG_NAME)):
        records, bad = read_jsonl(path)
        malformed += bad
        metrics = [r for r in records if isinstance(r, dict) and r.get("kind") == "metrics"]
        if metrics:
            runs.append(MetricsReport.from_dict(metrics[-1]))
    return runs, malformed


def build_report(root):
    """Group runs by config hash and flag the best group per metric"""
    runs, malformed = collect_runs(root)
    if malformed:
        logger.warning("skipped %d malformed log line(s) under %s", malformed, root)
    groups = {}
    for run in runs:
        key = run.config_hash or run.run_id
        group = groups.setdefault(key, ReportGroup(config_hash=key, mode=run.mode))
        group.runs.append(run)
    report = Report(groups=sorted(groups.values(), key=lambda g: (g.mode, g.config_hash)), malformed=malformed)

    for metric in report.metric_names():
        best = None
        for index, group in enumerate(report.groups):
            value = group.means().get(metric)
            if value is None:
                continue
            if best is None or is_better(metric, value, report.groups[best].means()[metric]):
                best = index
        report.best[metric] = best
    return report


def render_markdown(report, metrics=None):
    """One row per config hash; the best value per metric is bold"""
    metrics = metrics or report.metric_names()
    header = ["mode", "config", "seeds", *metrics]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for index, group in enumerate(report.groups):
        means = group.means()
        cells = [group.mode, group.config_hash, ",".join(str(s) for s in group.seeds)]
        for metric in metrics:
            if metric not in means:
                cells.append("")
                continue
            text = f"{means[metric]:.4f}"
            cells.append(f"**{text}**" if report.best.get(metric) == index else text)
        lines.append("| " + " | ".join(cells) + " |")
    if report.malformed:
        lines.append("")
        lines.append(f"_{report.malformed} malformed log line(s) skipped_")
    return "\n".join(lines) + "\n"


def write_report(report, out_dir):
    """report.md and report.csv (one row per run and metric)"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    markdown_path = out_dir / "report.md"
    markdown_path.write_text(render_markdown(report), encoding="utf-8")
    rows = [row for group in report.groups for run in group.runs for row in run.csv_rows()]
    csv_path = write_metrics_csv(rows, out_dir / "report.csv")
    return markdown_path, csv_path
