#!/usr/bin/env python3
"""
xmd directional experiments

Runs the desk-scale comparisons (soft vs hard margin, distillation vs no
distillation, quality weighting under noise, cross-modal matching, weak
teacher) over several seeds and prints how many seeds go the expected way.
Slow: every seed trains a teacher and several students on the full
verification benchmark.
"""
import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rich.table import Table

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import resolve_config  # noqa: E402
from src.console import console, setup_logging  # noqa: E402
from src.experiment import load_splits, run_experiment, train_teacher  # noqa: E402
from src.storage import write_json  # noqa: E402

MARGIN_GRID_DEG = (10, 20, 30, 40, 50)
NOISY_DB = "5"
MATCHING_LIFT = 0.10
SMOKE_MODES = ("feature", "none")


@dataclass
class Outcome:
    name: str
    needed: int
    per_seed: list = field(default_factory=list)
    soft: bool = False
    note: str = ""

    @property
    def passed(self):
        return sum(self.per_seed) >= self.needed


class Lab:
    """Caches benchmark splits and teachers per (preset, data/teacher overrides, seed)"""

    def __init__(self):
        self._prepared = {}
        self._reports = {}
        self.teacher_accuracy = {}

    def prepare(self, preset, seed, overrides=()):
        key = (preset, tuple(overrides), seed)
        if key not in self._prepared:
            config = resolve_config(preset=preset, overrides=list(overrides), seed=seed)
            splits = load_splits(config)
            teacher = train_teacher(config, splits)
            self._prepared[key] = (splits, teacher.arrays)
            self.teacher_accuracy[key] = teacher.val_accuracy
        return self._prepared[key]

    def run(self, preset, seed, overrides=(), prepared_with=()):
        """One distillation run; prepared_with names the overrides the data and teacher depend on"""
        key = (preset, tuple(prepared_with), tuple(overrides), seed)
        if key not in self._reports:
            splits, teacher_arrays = self.prepare(preset, seed, prepared_with)
            config = resolve_config(preset=preset, overrides=list(prepared_with) + list(overrides), seed=seed)
            self._reports[key] = run_experiment(config, teacher_arrays, splits)
        return self._reports[key]

    def snapshot(self):
        """Every run and teacher so far, keyed by preset|overrides|seed"""
        runs = {
            f"{preset}|{','.join(prepared + overrides)}|{seed}": report.metrics()
            for (preset, prepared, overrides, seed), report in self._reports.items()
        }
        teachers = {
            f"{preset}|{','.join(overrides)}|{seed}": accuracy
            for (preset, overrides, seed), accuracy in self.teacher_accuracy.items()
        }
        return {"runs": runs, "teacher_val_accuracy": teachers}


def soft_beats_hard(lab, seeds, preset="verification"):
    outcome = Outcome("soft margin <= FitNet EER", needed=len(seeds) - 1)
    for seed in seeds:
        hard = lab.run(preset, seed, ["distill.mode=fitnet-l2"])
        soft = min(lab.run(preset, seed, [f"distill.margin_deg={deg}"]).eer for deg in MARGIN_GRID_DEG)
        outcome.per_seed.append(soft <= hard.eer)
        console.print(f"   seed {seed}: best margin EER {soft:.4f} vs FitNet {hard.eer:.4f}")
    return outcome


def distillation_beats_control(lab, seeds, preset="verification"):
    outcome = Outcome("feature beats w/o distillation", needed=len(seeds) - 1)
    gaps = {1.0: [], 0.25: []}
    for fraction in gaps:
        data = [f"data.train_fraction={fraction}"]
        for seed in seeds:
            control = lab.run(preset, seed, ["distill.mode=none"], prepared_with=data)
            feature = lab.run(preset, seed, prepared_with=data)
            gaps[fraction].append(feature.val_accuracy - control.val_accuracy)
            if fraction == 1.0:
                outcome.per_seed.append(feature.val_accuracy > control.val_accuracy and feature.eer < control.eer)
            console.print(
                f"   seed {seed}, train {fraction:.0%}: "
                f"val acc {feature.val_accuracy:.4f} vs {control.val_accuracy:.4f}, "
                f"EER {feature.eer:.4f} vs {control.eer:.4f}"
            )
    full, small = float(np.mean(gaps[1.0])), float(np.mean(gaps[0.25]))
    outcome.note = f"mean val accuracy gap {full:+.4f} (full) vs {small:+.4f} (25%)"
    if small <= full:
        outcome.note += ", gap did not widen"
        outcome.per_seed = [False] * len(seeds)
    return outcome


def quality_under_noise(lab, seeds, preset="verification"):
    outcome = Outcome(f"quality weights win at {NOISY_DB} dB", needed=len(seeds) - 1)
    for seed in seeds:
        uniform = lab.run(preset, seed)
        weighted = lab.run(preset, seed, ["distill.quality.enabled=true"])
        uniform_eer, weighted_eer = uniform.noisy[NOISY_DB]["eer"], weighted.noisy[NOISY_DB]["eer"]
        outcome.per_seed.append(weighted_eer < uniform_eer)
        console.print(f"   seed {seed}: noisy EER {weighted_eer:.4f} (quality) vs {uniform_eer:.4f}")
    return outcome


def matching_emerges(lab, seeds, preset="verification"):
    outcome = Outcome("cross-modal matching above chance", needed=len(seeds))
    for seed in seeds:
        feature = lab.run(preset, seed)
        control = lab.run(preset, seed, ["distill.mode=none"])
        trials = feature.config["eval"]["matching_trials"]
        band = 3.0 * math.sqrt(0.25 / trials)
        lifted = all(feature.matching[k] >= 0.5 + MATCHING_LIFT for k in ("S-T(O)", "T-S(O)"))
        at_chance = all(abs(control.matching[k] - 0.5) <= band for k in ("S-T(O)", "T-S(O)"))
        outcome.per_seed.append(lifted and at_chance)
        console.print(
            f"   seed {seed}: S-T {feature.matching['S-T(O)']:.3f} T-S {feature.matching['T-S(O)']:.3f}, "
            f"control S-T {control.matching['S-T(O)']:.3f} T-S {control.matching['T-S(O)']:.3f}"
        )
    return outcome


def weak_teacher_helps(lab, seeds):
    outcome = Outcome("weak teacher still helps", needed=math.ceil(0.6 * len(seeds)), soft=True)
    for seed in seeds:
        control = lab.run("weak-teacher", seed, ["distill.mode=none"])
        feature = lab.run("weak-teacher", seed)
        outcome.per_seed.append(feature.accuracy >= control.accuracy)
        console.print(f"   seed {seed}: acc {feature.accuracy:.4f} vs control {control.accuracy:.4f}")
    return outcome


def smoke_snapshot(seed=0):
    """Metrics of the smoke preset for the fixture replay: one teacher, one student per mode"""
    lab = Lab()
    for mode in SMOKE_MODES:
        lab.run("smoke", seed, [f"distill.mode={mode}"])
    return lab.snapshot()


def write_fixtures(lab, outcomes, fixture_dir):
    fixture_dir = Path(fixture_dir)
    calibration = {
        **lab.snapshot(),
        "outcomes": {o.name: {"per_seed": o.per_seed, "needed": o.needed, "soft": o.soft} for o in outcomes},
    }
    write_json(fixture_dir / "calibration.json", calibration)
    write_json(fixture_dir / "smoke.json", smoke_snapshot())
    console.print(f"📁 {fixture_dir / 'calibration.json'}")
    console.print(f"📁 {fixture_dir / 'smoke.json'}")


CRITERIA = {
    "soft-hard": soft_beats_hard,
    "distill": distillation_beats_control,
    "quality": quality_under_noise,
    "matching": matching_emerges,
    "weak-teacher": weak_teacher_helps,
}


def main():
    parser = argparse.ArgumentParser(description="Run the xmd directional experiments")
    parser.add_argument("--seeds", type=int, default=5, help="number of seeds (default 5)")
    parser.add_argument("--only", action="append", choices=sorted(CRITERIA), help="run only these (repeatable)")
    parser.add_argument("--write-fixtures", metavar="DIR", help="also write calibration.json and smoke.json to DIR")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    setup_logging(args.verbose)

    seeds = list(range(args.seeds))
    lab = Lab()
    outcomes = []
    for name in args.only or CRITERIA:
        console.print(f"🔬 {name}")
        outcomes.append(CRITERIA[name](lab, seeds))

    table = Table(title="xmd directional experiments")
    for column in ("criterion", "seeds", "needed", "result", "note"):
        table.add_column(column)
    failed = 0
    for outcome in outcomes:
        if outcome.passed:
            result = "✅ pass"
        elif outcome.soft:
            result = "⚠️  weak"
        else:
            result = "❌ fail"
            failed += 1
        table.add_row(outcome.name, f"{sum(outcome.per_seed)}/{len(seeds)}", str(outcome.needed), result, outcome.note)
    console.print(table)
    console.print(f"{len(outcomes) - failed}/{len(outcomes)} criteria hold")
    if args.write_fixtures:
        write_fixtures(lab, outcomes, args.write_fixtures)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
