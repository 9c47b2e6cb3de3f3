"""
Flags and error handling shared by the xmd subcommands
"""
import argparse
import functools

from ..config import resolve_config
from ..console import console, setup_logging
from ..errors import XmdError


def command_parser(command, description):
    """Parser with the --preset/--config/--seed/--out/--set flags"""
    parser = argparse.ArgumentParser(prog=f"xmd {command}", description=description)
    parser.add_argument("--preset", help="preset name from presets/ (see 'xmd list')")
    parser.add_argument("--config", help="YAML or JSON config document")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted override, e.g. distill.margin_deg=30 (repeatable)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def resolve(options):
    """Configure logging and build the run config from parsed flags"""
    setup_logging(options.verbose)
    return resolve_config(
        preset=options.preset,
        config_path=options.config,
        overrides=options.set,
        seed=options.seed,
        out_dir=options.out,
    )


def reports_errors(handler):
    """Print library errors in one line and turn them into exit codes"""

    @functools.wraps(handler)
    def wrapper(args):
        try:
            result = handler(args)
            return 0 if result is None else result
        except XmdError as e:
            console.print(f"❌ {e}", markup=False)
            return e.exit_code
        except KeyboardInterrupt:
            console.print("\n⚠️  Interrupted")
            return 130

    return wrapper


def split_list(text):
    """'0.2,0.4, 0.6' -> ['0.2', '0.4', '0.6']"""
    return [part.strip() for part in text.split(",") if part.strip()]
