"""
distill command for xmd CLI
"""
from pathlib import Path

from ..console import console
from ..experiment import RUN_LOG, TEACHER_CHECKPOINT, distill_train, evaluate, load_teacher_arrays
from .common import command_parser, reports_errors, resolve


@reports_errors
def handle_distill_command(args):
    """Train a student against a frozen teacher checkpoint"""
    parser = command_parser("distill", "train the student with the configured distillation mode")
    parser.add_argument("--teacher", help=f"teacher checkpoint (default: <out>/{TEACHER_CHECKPOINT})")
    parser.add_argument("--evaluate", action="store_true", help="evaluate the student when training ends")
    options = parser.parse_args(args)
    config = resolve(options)

    teacher_path = options.teacher or Path(config.out_dir) / TEACHER_CHECKPOINT
    result = distill_train(config, load_teacher_arrays(teacher_path), out_dir=config.out_dir)
    console.print(f"📁 Student checkpoint: {result.checkpoint}")
    console.print(f"📁 Epoch log: {Path(config.out_dir) / RUN_LOG}")
    if options.evaluate:
        report = evaluate(config, result.bundle, history=result.history, out_dir=config.out_dir)
        console.print(f"✅ EER {report.eer:.2%}  minDCF {report.min_dcf:.4f}  accuracy {report.accuracy:.2%}")
