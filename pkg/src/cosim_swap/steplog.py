"""Step logs and their CSV rendering."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


@dataclass
class StepLog:
    time: float
    values: dict = field(default_factory=dict)  # column name -> value
    iteration: int = 0
    offsets: dict = field(default_factory=dict)  # swap instance -> unit-local time


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "%.9f" % value
    return str(value)


def format_row(log: StepLog, columns) -> str:
    cells = [format_value(float(log.time))]
    cells += [format_value(log.values.get(c)) for c in columns]
    return ",".join(cells)


def header(columns) -> str:
    return ",".join(["time", *columns])


class CsvSink:
    """Writes one CSV; ``segment`` starts `<stem>.segN<suffix>` with a fresh header."""

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path else None
        self.columns = []
        self.segments = []  # paths written, in order
        self._fh = None
        self._buf = None

    def begin(self, columns):
        self.columns = list(columns)
        self._open(self.path)
        self._emit(header(self.columns))

    def segment(self, columns):
        self.close()
        n = len(self.segments) + 1
        path = None
        if self.path is not None:
            path = self.path.with_name(f"{self.path.stem}.seg{n}{self.path.suffix or '.csv'}")
        self.columns = list(columns)
        self._open(path)
        self._emit(header(self.columns))

    def write(self, log: StepLog):
        self._emit(format_row(log, self.columns))

    def _open(self, path):
        if path is None:
            self._buf = io.StringIO()
            self.segments.append(self._buf)
        else:
            self._fh = open(path, "w", encoding="utf-8", newline="")
            self.segments.append(path)

    def _emit(self, line):
        (self._fh or self._buf).write(line + "\n")

    def text(self) -> str:
        """Contents of the first segment when writing in memory."""
        first = self.segments[0]
        return first.getvalue() if isinstance(first, io.StringIO) else Path(first).read_text()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        self._buf = None
