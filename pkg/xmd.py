#!/usr/bin/env python3
"""
xmd - a desk-scale lab for soft-constrained cross-modal knowledge distillation
"""
import sys

from src.cli import handle_command


def main():
    """Run one xmd command and exit with its status"""
    sys.exit(handle_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
