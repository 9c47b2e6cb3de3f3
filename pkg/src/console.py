"""
Console output and logging setup for xmd
"""
import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console(highlight=False)


def setup_logging(verbose=False):
    """Route library warnings through rich"""
    level = logging.DEBUG if verbose else logging.WARNING
    root = logging.getLogger()
    # Replace any handler left over from an earlier call
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.addHandler(RichHandler(console=console, show_path=False, markup=False))
    root.setLevel(level)
