"""
List command for xmd CLI
"""
from ..config import list_presets, load_preset


def handle_list_command(args):
    """Handle list command"""
    presets = list_presets()
    if not presets:
        print("no presets found in presets/ directory")
        return 0
    for name in presets:
        description = load_preset(name).get("description", "")
        print(f"  {name:<16} {description}")
    return 0
