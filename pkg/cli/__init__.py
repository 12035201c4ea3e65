"""
SCEF - Command-Line Package

Components:
- app.py      - cli_main: subcommand dispatch and exit codes
- commands.py - argument parser construction
- console.py  - coloured status lines on stderr
- reports.py  - JSON / CSV / table report formatting
"""

from cli.app import cli_main

__all__ = ["cli_main"]
