"""
CLI operations for xmd - Main handler
"""
from .distill import handle_distill_command
from .evaluate import handle_evaluate_command
from .gen_data import handle_gen_data_command
from .gradcheck import handle_gradcheck_command
from .help import handle_help_command
from .list import handle_list_command
from .report import handle_report_command
from .sweep import handle_sweep_command
from .train_teacher import handle_train_teacher_command

COMMANDS = {
    "gen-data": handle_gen_data_command,
    "train-teacher": handle_train_teacher_command,
    "distill": handle_distill_command,
    "evaluate": handle_evaluate_command,
    "sweep": handle_sweep_command,
    "gradcheck": handle_gradcheck_command,
    "report": handle_report_command,
    "list": handle_list_command,
    "ls": handle_list_command,
    "help": handle_help_command,
}


def handle_command(argv):
    """Process an xmd command line and return its exit status"""
    if not argv:
        handle_help_command([])
        return 2

    cmd = argv[0].lower()
    args = argv[1:]
    handler = COMMANDS.get(cmd)
    if handler is None:
        print(f"unknown command: {cmd}")
        print("type 'xmd help' for available commands")
        return 2
    try:
        return handler(args)
    except SystemExit as e:
        # argparse exits on bad usage and on --help
        return e.code if isinstance(e.code, int) else 2
