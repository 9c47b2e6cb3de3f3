#!/usr/bin/env python3
"""
End-to-end tests for xmd: teacher, distillation, evaluation, sweeps, CLI
"""
import json
import tempfile
import unittest
from pathlib import Path
import sys

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import handle_command
from src.config import resolve_config, with_override
from src.errors import ConfigurationError, NumericError, UsageError
from src.experiment import (
    LAST_GOOD_CHECKPOINT,
    RUN_LOG,
    STUDENT_CHECKPOINT,
    TEACHER_CHECKPOINT,
    TEACHER_SUMMARY,
    _abort,
    distill_train,
    evaluate,
    load_splits,
    load_student,
    load_teacher_arrays,
    run_experiment,
    run_label,
    sweep,
    sweep_key,
    train_teacher,
)
from src.numeric import ParamSet
from src.storage import load_checkpoint, read_jsonl, save_checkpoint


def smoke_config(out_dir, *overrides):
    return resolve_config(preset="smoke", overrides=list(overrides), out_dir=out_dir)


def scaled_checkpoint(arrays, factor, path):
    params = ParamSet()
    for name, values in arrays.items():
        params.add(name, values * factor)
    return save_checkpoint(params, path)


class TestHarness(unittest.TestCase):
    """Test teacher pretraining, distillation and evaluation on the smoke benchmark"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.TemporaryDirectory()
        cls.root = Path(cls.temp_dir.name)
        cls.config = smoke_config(cls.root / "run")
        cls.splits = load_splits(cls.config)
        cls.teacher = train_teacher(cls.config, cls.splits, out_dir=cls.root / "teacher")

    @classmethod
    def tearDownClass(cls):
        cls.temp_dir.cleanup()

    def test_teacher_outputs(self):
        """Test the teacher writes config, log and a reloadable checkpoint"""
        teacher_dir = self.root / "teacher"
        self.assertTrue((teacher_dir / "config.json").exists())
        records, malformed = read_jsonl(teacher_dir / "teacher.jsonl")
        self.assertEqual(malformed, 0)
        epochs = self.config.teacher.epochs
        self.assertEqual([r["kind"] for r in records], ["teacher_epoch"] * epochs + ["teacher"])
        arrays = load_teacher_arrays(teacher_dir / TEACHER_CHECKPOINT)
        self.assertEqual(set(arrays), set(self.teacher.arrays))
        for name, values in arrays.items():
            self.assertEqual(values.tobytes(), self.teacher.arrays[name].tobytes())
        summary = json.loads((teacher_dir / TEACHER_SUMMARY).read_text(encoding="utf-8"))
        self.assertEqual(summary["val_accuracy"], self.teacher.val_accuracy)
        self.assertEqual(summary["epochs"], epochs)
        self.assertEqual(summary["target_accuracy"], 0.9)

    def test_teacher_accuracy_threshold(self):
        """Test the smoke teacher separates its classes well above chance"""
        self.assertGreater(self.teacher.val_accuracy, 0.7)
        self.assertGreater(self.teacher.history[-1]["train_accuracy"], 0.8)
        print(f"✅ smoke teacher val accuracy {self.teacher.val_accuracy:.2%}")

    def test_teacher_is_frozen_during_distillation(self):
        """Test teacher parameters are bit-identical after training"""
        result = distill_train(self.config, self.teacher.arrays, self.splits)
        after = result.bundle.teacher_params().snapshot()
        for name, values in self.teacher.arrays.items():
            self.assertEqual(after[name].tobytes(), values.tobytes(), name)

    def test_epoch_records(self):
        """Test one record per epoch with training and validation fields"""
        result = distill_train(self.config, self.teacher.arrays, self.splits)
        self.assertEqual(len(result.history), self.config.epochs)
        for record in result.history:
            for key in ("epoch", "lr", "loss", "task_loss", "distill_loss", "train_accuracy", "val_eer"):
                self.assertIn(key, record)
            self.assertTrue(np.isfinite(record["loss"]))
            self.assertNotIn("quality", record)

    def test_quality_run(self):
        """Test feature+quality logs its running statistics"""
        config = with_override(self.config, "distill.quality.enabled=true")
        self.assertEqual(run_label(config.distill), "feature+quality")
        result = distill_train(config, self.teacher.arrays, self.splits)
        quality = result.history[-1]["quality"]
        self.assertGreater(quality["sigma_q"], 0.0)
        self.assertGreaterEqual(quality["mean_weight"], 0.0)
        self.assertTrue(result.quality.warmed_up)

    def test_every_mode_trains(self):
        """Test classifier, KD and FitNet modes run end to end"""
        for mode in ("classifier", "kd-kl", "fitnet-l2"):
            config = with_override(with_override(self.config, f"distill.mode={mode}"), "epochs=1")
            result = distill_train(config, self.teacher.arrays, self.splits)
            self.assertEqual(len(result.history), 1, mode)
            self.assertTrue(np.isfinite(result.history[0]["loss"]), mode)

    def test_control_ignores_teacher(self):
        """Test mode=none gives the same trajectory for any teacher checkpoint"""
        config = with_override(self.config, "distill.mode=none")
        rng = np.random.default_rng(0)
        other_teacher = {name: rng.standard_normal(values.shape) for name, values in self.teacher.arrays.items()}
        first = distill_train(config, self.teacher.arrays, self.splits)
        second = distill_train(config, other_teacher, self.splits)
        self.assertEqual(first.history, second.history)
        a, b = first.bundle.student.params.snapshot(), second.bundle.student.params.snapshot()
        for name in a:
            self.assertEqual(a[name].tobytes(), b[name].tobytes(), name)
        self.assertEqual(run_label(config.distill), "none")

    def test_control_matching_sits_at_chance(self):
        """Test an untrained projection head gives chance-level cross-modal matching"""
        config = with_override(with_override(self.config, "distill.mode=none"), "eval.matching_trials=1000")
        result = distill_train(config, self.teacher.arrays, self.splits)
        report = evaluate(config, result.bundle, self.splits, run_id="control", history=result.history)
        band = 4 * np.sqrt(0.25 / 1000)
        for key in ("S-T(O)", "T-S(O)"):
            self.assertAlmostEqual(report.matching[key], 0.5, delta=band, msg=key)

    def test_rerun_is_byte_identical(self):
        """Test the same config and seed reproduce every output file"""
        out_dir = self.root / "repeat"
        names = ("config.json", RUN_LOG, STUDENT_CHECKPOINT, "metrics.json", "metrics.csv")
        contents = []
        for _ in range(2):
            config = smoke_config(out_dir)
            run_experiment(config, self.teacher.arrays, self.splits, out_dir=out_dir)
            contents.append({name: (out_dir / name).read_bytes() for name in names})
        for name in names:
            self.assertEqual(contents[0][name], contents[1][name], name)
        print("✅ rerun reproduces config, log, checkpoint and metrics byte for byte")

    def test_report_contents(self):
        """Test the evaluation report covers noise, matching and the teacher"""
        out_dir = self.root / "evaluated"
        report = run_experiment(self.config, self.teacher.arrays, self.splits, out_dir=out_dir)
        self.assertEqual(set(report.noisy), {"15", "5"})
        self.assertEqual(set(report.matching), {"S-T(O)", "T-S(O)", "S-T(H)", "T-S(H)"})
        self.assertIsNotNone(report.eer_hard)
        self.assertEqual(set(report.shifted), {"eer", "min_dcf"})
        epochs = [r for r in read_jsonl(out_dir / RUN_LOG)[0] if r["kind"] == "epoch"]
        self.assertEqual(report.val_accuracy, epochs[-1]["val_accuracy"])
        self.assertIn("shifted_eer", report.metrics())
        for name, value in report.metrics().items():
            self.assertGreaterEqual(value, 0.0, name)
            self.assertLessEqual(value, 1.0, name)
        self.assertEqual(len(report.loss_trace), self.config.epochs)
        self.assertEqual(report.mode, "feature")
        csv_text = (out_dir / "metrics.csv").read_text(encoding="utf-8")
        self.assertIn("eer_db15", csv_text)
        self.assertIn("matching_T-S(O)", csv_text)
        records, _ = read_jsonl(out_dir / RUN_LOG)
        self.assertEqual(records[-1]["kind"], "metrics")

    def test_checkpoint_reload_gives_same_metrics(self):
        """Test a reloaded student scores exactly like the trained one"""
        out_dir = self.root / "reload"
        result = distill_train(self.config, self.teacher.arrays, self.splits, out_dir=out_dir)
        direct = evaluate(self.config, result.bundle, self.splits, run_id="x", history=result.history)
        bundle = load_student(self.config, out_dir / STUDENT_CHECKPOINT, self.splits)
        reloaded = evaluate(self.config, bundle, self.splits, run_id="x", history=result.history)
        self.assertEqual(direct.metrics(), reloaded.metrics())

    def test_missing_checkpoints(self):
        """Test absent checkpoints are usage errors"""
        with self.assertRaises(UsageError):
            load_teacher_arrays(self.root / "nowhere" / TEACHER_CHECKPOINT)
        with self.assertRaises(UsageError):
            load_student(self.config, self.root / "nowhere" / STUDENT_CHECKPOINT, self.splits)

    def test_non_finite_training_aborts_with_last_good(self):
        """Test an overflowing teacher stops training and saves the last good state"""
        out_dir = self.root / "diverged"
        broken = {name: values * 1e200 for name, values in self.teacher.arrays.items()}
        with self.assertRaises(NumericError):
            distill_train(self.config, broken, self.splits, out_dir=out_dir)
        self.assertTrue((out_dir / LAST_GOOD_CHECKPOINT).exists())
        self.assertFalse((out_dir / STUDENT_CHECKPOINT).exists())
        records, _ = read_jsonl(out_dir / RUN_LOG)
        self.assertEqual(records[-1]["kind"], "abort")

    def test_non_finite_training_without_out_dir_keeps_last_good(self):
        """Test an in-memory abort carries finite last good parameters"""
        broken = {name: values * 1e200 for name, values in self.teacher.arrays.items()}
        with self.assertRaises(NumericError) as ctx:
            distill_train(self.config, broken, self.splits)
        last_good = ctx.exception.last_good
        self.assertIn("student.fc0.weight", last_good)
        for name, values in last_good.items():
            if not name.startswith("teacher"):
                self.assertTrue(np.all(np.isfinite(values)), name)
        self.assertNotIn("saved to", str(ctx.exception))

    def test_abort_restores_parameters_in_memory(self):
        """Test the parameter set is rolled back even when nothing is written"""
        params = ParamSet()
        params.add("student.fc0.weight", np.ones((2, 2)))
        last_good = params.snapshot()
        params["student.fc0.weight"].data[...] = np.nan
        with self.assertRaises(NumericError):
            _abort(params, last_good, None, None, 0, 3, NumericError("overflow"))
        np.testing.assert_array_equal(params["student.fc0.weight"].data, np.ones((2, 2)))


class TestSweep(unittest.TestCase):
    """Test hyperparameter sweeps"""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_sweep_keys(self):
        """Test margins are angles under cosine and raw values under sq-l2-mean"""
        config = smoke_config(self.root)
        self.assertEqual(sweep_key(config, "margin"), "distill.margin_deg")
        self.assertEqual(sweep_key(with_override(config, "distill.metric=sq-l2-mean"), "margin"), "distill.margin")
        self.assertEqual(sweep_key(with_override(config, "distill.quality.enabled=true"), "h"), "distill.quality.h")

    def test_h_sweep_needs_quality(self):
        """Test sweeping h without quality weights is rejected before any run"""
        config = smoke_config(self.root)
        with self.assertRaises(ConfigurationError):
            sweep_key(config, "h")
        with self.assertRaises(ConfigurationError):
            sweep(config, "h", [0.5, 1.0], seeds=[0], out_dir=self.root)
        self.assertFalse((self.root / "seed0").exists())
        control = with_override(with_override(config, "distill.quality.enabled=true"), "distill.mode=none")
        with self.assertRaises(ConfigurationError):
            sweep_key(control, "h")

    def test_alpha_sweep_records_failures_and_continues(self):
        """Test a bad value fails alone while the others finish"""
        config = smoke_config(self.root, "epochs=1")
        result = sweep(config, "alpha", [0.2, 0.8, 1.5], seeds=[0], out_dir=self.root)
        self.assertEqual([row["value"] for row in result.rows], [0.2, 0.8, 1.5])
        self.assertEqual([row["failed"] for row in result.rows], [0, 0, 1])
        self.assertIsNotNone(result.rows[0]["mean_eer"])
        self.assertIsNone(result.rows[2]["mean_eer"])
        self.assertEqual(len(result.failures), 1)
        self.assertTrue(result.table_path.exists())
        self.assertTrue((self.root / "alpha=0.2" / "seed0" / RUN_LOG).exists())

        records, _ = read_jsonl(self.root / "sweep.jsonl")
        self.assertEqual(sorted(r["kind"] for r in records), ["child", "child", "failure"])
        header = result.table_path.read_text(encoding="utf-8").splitlines()[0]
        self.assertEqual(header.split(",")[:3], ["value", "mean_eer", "eer_seed0"])


class TestReportCommand(unittest.TestCase):
    """Test report aggregation through the CLI"""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _metrics_record(self, config_hash, mode, seed, eer):
        return {
            "kind": "metrics",
            "run_id": f"{mode}-seed{seed}",
            "mode": mode,
            "seed": seed,
            "eer": eer,
            "min_dcf": 0.5,
            "accuracy": 0.8,
            "config_hash": config_hash,
        }

    def _write_log(self, path, *records, junk=False):
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(r) for r in records]
        if junk:
            lines.insert(0, "{truncated")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def test_grouping_and_best_row(self):
        """Test seeds group by config hash and the best EER is bold"""
        self._write_log(self.root / "a" / "seed0" / RUN_LOG, self._metrics_record("aaa", "feature", 0, 0.10))
        self._write_log(self.root / "a" / "seed1" / RUN_LOG, self._metrics_record("aaa", "feature", 1, 0.20), junk=True)
        self._write_log(self.root / "b" / "seed0" / RUN_LOG, self._metrics_record("bbb", "none", 0, 0.30))
        before = (self.root / "a" / "seed1" / RUN_LOG).read_bytes()

        self.assertEqual(handle_command(["report", str(self.root)]), 0)
        markdown = (self.root / "report.md").read_text(encoding="utf-8")
        rows = [line for line in markdown.splitlines() if line.startswith("| feature") or line.startswith("| none")]
        self.assertEqual(len(rows), 2)
        self.assertIn("0,1", rows[0])
        self.assertIn("**0.1500**", rows[0])
        self.assertIn("1 malformed log line", markdown)
        self.assertTrue((self.root / "report.csv").exists())
        self.assertEqual((self.root / "a" / "seed1" / RUN_LOG).read_bytes(), before)

    def test_empty_directory(self):
        """Test no runs gives exit status 1"""
        self.assertEqual(handle_command(["report", str(self.root)]), 1)


class TestCommandLine(unittest.TestCase):
    """Test the xmd subcommands and their exit codes"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.TemporaryDirectory()
        cls.root = Path(cls.temp_dir.name)
        cls.out = cls.root / "cli"
        cls.data = cls.out / "data"
        cls.flags = ["--preset", "smoke", "--out", str(cls.out), "--set", f"data_path={cls.data}"]

    @classmethod
    def tearDownClass(cls):
        cls.temp_dir.cleanup()

    def test_full_pipeline(self):
        """Test gen-data, train-teacher, distill, evaluate and report in sequence"""
        self.assertEqual(handle_command(["gen-data", "--preset", "smoke", "--out", str(self.out)]), 0)
        self.assertTrue((self.data / "test-open.bin").exists())
        self.assertEqual(handle_command(["train-teacher", *self.flags]), 0)
        self.assertTrue((self.out / TEACHER_CHECKPOINT).exists())
        self.assertEqual(handle_command(["distill", *self.flags, "--evaluate"]), 0)
        self.assertTrue((self.out / "metrics.csv").exists())
        self.assertEqual(handle_command(["evaluate", *self.flags]), 0)
        resolved = json.loads((self.out / "config.json").read_text(encoding="utf-8"))
        self.assertEqual(resolved["data_path"], str(self.data))
        self.assertEqual(resolved["eval"]["p_tar"], 0.01)
        self.assertEqual(handle_command(["report", str(self.out)]), 0)

    def test_usage_exit_codes(self):
        """Test missing commands, unknown commands and bad flags"""
        self.assertEqual(handle_command([]), 2)
        self.assertEqual(handle_command(["bogus"]), 2)
        self.assertEqual(handle_command(["distill", "--no-such-flag"]), 2)
        self.assertEqual(handle_command(["distill", "--preset", "missing"]), 2)
        self.assertEqual(handle_command(["train-teacher", "--preset", "smoke", "--set", "distill.alpha=2"]), 2)
        self.assertEqual(handle_command(["help"]), 0)
        self.assertEqual(handle_command(["list"]), 0)

    def test_missing_student_is_usage_error(self):
        """Test evaluate without a student checkpoint"""
        empty = self.root / "empty"
        self.assertEqual(handle_command(["evaluate", "--preset", "smoke", "--out", str(empty)]), 2)

    def test_corrupt_data_exit_code(self):
        """Test unreadable dataset files exit with 3"""
        config = smoke_config(self.root / "teacher-for-bad-data")
        teacher = train_teacher(config, out_dir=config.out_dir)
        bad = self.root / "bad-data"
        bad.mkdir()
        for split in ("teacher-pretrain", "train", "val", "test-closed", "test-open"):
            (bad / f"{split}.bin").write_bytes(b"XMDDATA1\x01")
        args = ["--preset", "smoke", "--out", str(self.root / "bad-run"), "--set", f"data_path={bad}"]
        code = handle_command(["distill", *args, "--teacher", str(teacher.checkpoint)])
        self.assertEqual(code, 3)

    def test_numeric_failure_exit_code(self):
        """Test a diverging run exits with 4"""
        config = smoke_config(self.root / "teacher-for-nan")
        teacher = train_teacher(config, out_dir=config.out_dir)
        broken = scaled_checkpoint(load_checkpoint(teacher.checkpoint), 1e200, self.root / "broken.ckpt")
        code = handle_command(
            ["distill", "--preset", "smoke", "--out", str(self.root / "nan-run"), "--teacher", str(broken)]
        )
        self.assertEqual(code, 4)
        self.assertTrue((self.root / "nan-run" / LAST_GOOD_CHECKPOINT).exists())

    def test_gradcheck_command(self):
        """Test a short gradient check passes"""
        self.assertEqual(handle_command(["gradcheck", "--seeds", "2"]), 0)


if __name__ == '__main__':
    unittest.main(verbosity=2)
