"""Rich consoles for CLI output."""

from rich.console import Console

# Tables, panels and summaries
console = Console()

# One-line error messages, kept off stdout so reports can be piped
err_console = Console(stderr=True)
