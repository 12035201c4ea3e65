"""
Console status lines for the ``scef`` command.

Status goes to stderr so that JSON / CSV on stdout stays machine-readable.
Colours are dropped on Windows and when stderr is not a terminal.
"""

import platform
import sys


class Colors:
    """ANSI color codes for terminal output"""
    BLUE = '\033[0;34m'
    GREEN = '\033[0;32m'
    YELLOW = '\033[1;33m'
    RED = '\033[0;31m'
    CYAN = '\033[0;36m'
    END = '\033[0m'

    @staticmethod
    def disable():
        Colors.BLUE = ''
        Colors.GREEN = ''
        Colors.YELLOW = ''
        Colors.RED = ''
        Colors.CYAN = ''
        Colors.END = ''

    @staticmethod
    def disable_if_unsupported(stream=None):
        """Disable colors on Windows or for non-TTY streams"""
        stream = stream or sys.stderr
        if platform.system() == 'Windows' or not getattr(stream, "isatty", lambda: False)():
            Colors.disable()


Colors.disable_if_unsupported()


def _emit(text):
    print(text, file=sys.stderr)


def print_header(title):
    """Print a formatted header"""
    _emit(f"\n{Colors.BLUE}{'='*60}{Colors.END}")
    _emit(f"{Colors.BLUE}{title:^60}{Colors.END}")
    _emit(f"{Colors.BLUE}{'='*60}{Colors.END}\n")


def print_step(number, total, title):
    """Print a step header"""
    _emit(f"{Colors.YELLOW}[{number}/{total}]{Colors.END} {title}...")


def print_success(message):
    _emit(f"{Colors.GREEN}✓{Colors.END} {message}")


def print_warning(message):
    _emit(f"{Colors.YELLOW}⚠{Colors.END}  {message}")


def print_error(message):
    _emit(f"{Colors.RED}✗{Colors.END} {message}")
