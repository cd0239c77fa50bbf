"""Syscall number tables.

A table maps syscall numbers to symbolic names. Every count vector in the
package is indexed by number, so a table mostly fixes the vector width
(``max_index + 1``); names are metadata for humans.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

MAX_TABLE_INDEX = 512
BUILTIN_TABLES = ("x86-32", "x86-64")
DEFAULT_TABLE = "x86-64"
ENV_VAR = "RIGKIT_SYSCALL_TABLE"


class SyscallTableError(ValueError):
    pass


@dataclass(frozen=True)
class SyscallTable:
    entries: dict[int, str]
    max_index: int
    source: str = "<memory>"
    _by_name: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.max_index > MAX_TABLE_INDEX:
            raise SyscallTableError(f"max_index {self.max_index} exceeds {MAX_TABLE_INDEX}")
        for num, name in self.entries.items():
            if num < 0 or num > self.max_index:
                raise SyscallTableError(f"syscall {name}={num} outside [0, {self.max_index}]")
            self._by_name[name] = num
            self._by_name[_short(name)] = num

    @property
    def width(self) -> int:
        return self.max_index + 1

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> int:
        """Number for ``name``; accepts ``__NR_read`` or ``read``."""
        try:
            return self._by_name[name]
        except KeyError:
            return self._by_name[_short(name)]

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and (name in self._by_name or _short(name) in self._by_name)

    def name(self, number: int) -> str | None:
        return self.entries.get(number)


def _short(name: str) -> str:
    return name[5:] if name.startswith("__NR_") else name


def parse_table(text: str, source: str = "<memory>") -> SyscallTable:
    """Parse a two-column ``name number`` table.

    Blank lines and ``#`` comments are ignored. A C header with
    ``#define __NR_x N`` lines is accepted too.
    """
    entries: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#define"):
            line = line[len("#define"):].strip()
        elif not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SyscallTableError(f"{source}:{lineno}: expected 'name number', got {raw!r}")
        name, num_s = parts
        try:
            num = int(num_s)
        except ValueError as exc:
            raise SyscallTableError(f"{source}:{lineno}: bad number {num_s!r}") from exc
        if num < 0:
            raise SyscallTableError(f"{source}:{lineno}: negative syscall number {num}")
        if num in entries:
            raise SyscallTableError(
                f"{source}:{lineno}: duplicate number {num} ({entries[num]}, {name})"
            )
        entries[num] = name
    if not entries:
        raise SyscallTableError(f"{source}: empty syscall table")
    return SyscallTable(entries=entries, max_index=max(entries), source=source)


def load_syscall_table(source: str | os.PathLike[str] | None = None) -> SyscallTable:
    """Load a built-in table by name or a table file by path.

    With ``source=None`` the ``RIGKIT_SYSCALL_TABLE`` environment variable is
    consulted, falling back to the x86-64 table.
    """
    if source is None:
        source = os.environ.get(ENV_VAR) or DEFAULT_TABLE
    src = os.fspath(source)
    if src in BUILTIN_TABLES:
        text = resources.files("rigkit.data").joinpath(f"{src}.tbl").read_text()
        return parse_table(text, source=src)
    path = Path(src)
    if not path.exists():
        raise SyscallTableError(
            f"unknown syscall table {src!r}: not a built-in {BUILTIN_TABLES} nor a file"
        )
    return parse_table(path.read_text(), source=str(path))
