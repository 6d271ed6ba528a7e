from contextlib import contextmanager
from typing import Iterable, Iterator, Optional, Sequence, TypeVar

from rich.console import Console
from rich.progress import track
from rich.table import Table

T = TypeVar("T")


class Messenger:
    _quiet = False  # Class-level quiet flag
    _console = Console(highlight=False)

    @classmethod
    def set_quiet(cls, quiet: bool = True):
        """Set the quiet mode for all messenger instances"""
        cls._quiet = quiet

    @classmethod
    @contextmanager
    def quiet_mode(cls):
        """Context manager for temporarily enabling quiet mode"""
        previous = cls._quiet
        cls._quiet = True
        try:
            yield
        finally:
            cls._quiet = previous

    def __init__(self, quiet: Optional[bool] = None):
        """Initialize messenger with optional instance-level quiet setting"""
        self._instance_quiet = quiet

    @property
    def quiet(self) -> bool:
        """Effective quiet setting (instance-level if set, otherwise class-level)"""
        return self._instance_quiet if self._instance_quiet is not None else self._quiet

    def _emit(self, markup: str):
        if not self.quiet:
            self._console.print(markup)

    def info(self, msg: str):
        self._emit(f"[cyan][+] {msg}[/cyan]")

    def success(self, msg: str):
        self._emit(f"[green][✓] {msg}[/green]")

    def warning(self, msg: str):
        self._emit(f"[yellow][!] {msg}[/yellow]")

    def error(self, msg: str):
        self._emit(f"[bold red][-] {msg}[/bold red]")

    def note(self, msg: str):
        self._emit(f"[white][#] {msg}[/white]")

    def sweet(self, msg: str):
        self._emit(f"[magenta]{msg}[/magenta]")

    def table(self, title: str, columns: Sequence[str], rows: Iterable[Sequence[object]]):
        """Print rows as a rich table; cells are rendered with str()"""
        if self.quiet:
            return
        table = Table(title=title, title_style="bold blue")
        for column in columns:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(*("" if cell is None else str(cell) for cell in row))
        self._console.print(table)

    def progress(self, sequence: Iterable[T], description: str, total: Optional[int] = None) -> Iterator[T]:
        """Iterate with a progress bar unless quiet"""
        if self.quiet:
            yield from sequence
            return
        yield from track(sequence, description=description, total=total, console=self._console,
                         transient=True)


__all__ = ["Messenger"]
