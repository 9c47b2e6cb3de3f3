"""
train-teacher command for xmd CLI
"""
from ..console import console
from ..experiment import train_teacher
from .common import command_parser, reports_errors, resolve


@reports_errors
def handle_train_teacher_command(args):
    """Pretrain, freeze and checkpoint the teacher encoder"""
    parser = command_parser("train-teacher", "pretrain the teacher on the teacher-pretrain split")
    options = parser.parse_args(args)
    config = resolve(options)

    result = train_teacher(config, out_dir=config.out_dir)
    console.print(f"📁 Teacher checkpoint: {result.checkpoint}")
