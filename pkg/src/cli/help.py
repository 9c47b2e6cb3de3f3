"""
Help command for xmd CLI
"""


def handle_help_command(args):
    """Handle help command"""
    print("commands:")
    print("  gen-data        - write the synthetic benchmark splits")
    print("  train-teacher   - pretrain and freeze the teacher")
    print("  distill         - train a student against a teacher checkpoint")
    print("  evaluate        - score a student (accuracy, EER, minDCF, matching)")
    print("  sweep           - ablate alpha | margin | beta | h across seeds")
    print("  gradcheck       - finite-difference check of every objective")
    print("  report <dir>    - aggregate run logs into markdown and CSV")
    print("  list            - list presets")
    print("  help            - show this help")
    print()
    print("common flags: --preset NAME --config PATH --seed N --out DIR --set key=value")
    return 0
