"""Where new swap specifications come from: a watch folder or a fixed schedule."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

log = logging.getLogger(__name__)

APPLIED = ".applied"
REJECTED = ".rejected"


class TransferDirError(OSError):
    pass


def scan_transfer_dir(directory) -> list[Path]:
    d = Path(directory)
    try:
        entries = list(d.iterdir())
    except OSError as exc:
        raise TransferDirError(f"cannot read transfer directory {d}: {exc}") from exc
    return sorted((p for p in entries if p.suffix == ".json" and p.is_file()), key=lambda p: p.name)


class WatchFolder:
    """Live mode: one pending ``*.json`` per transfer point, oldest name first.

    A consumed spec is renamed ``<name>.applied``; a rejected one
    ``<name>.rejected`` with the diagnostics in ``<name>.rejected.txt``.
    """

    scheduled = False

    def __init__(self, directory):
        self.directory = Path(directory)
        self.history = []  # (iteration, name, outcome)

    def poll(self, iteration: int) -> Optional[tuple]:
        candidates = scan_transfer_dir(self.directory)
        if not candidates:
            return None
        path = candidates[0]
        return path.name, path.read_text(encoding="utf-8")

    def consumed(self, name, iteration):
        p = self.directory / name
        p.rename(p.with_name(name + APPLIED))
        self.history.append((iteration, name, "applied"))

    def rejected(self, name, iteration, diagnostics):
        p = self.directory / name
        target = p.with_name(name + REJECTED)
        p.rename(target)
        target.with_name(target.name + ".txt").write_text(
            "\n".join(str(d) for d in diagnostics) + "\n", encoding="utf-8"
        )
        self.history.append((iteration, name, "rejected"))


class ScheduledTransfers:
    """Test mode: spec ``text`` becomes available at ``iteration``.

    Entries are (iteration, name, text).  A spec that becomes available
    is offered at every transfer point until it is consumed or rejected.
    """

    scheduled = True

    def __init__(self, entries):
        self.pending = sorted(entries, key=lambda e: (e[0], e[1]))
        self.history = []

    @classmethod
    def from_files(cls, entries):
        return cls([(it, Path(p).name, Path(p).read_text(encoding="utf-8")) for it, p in entries])

    def specs(self) -> list[str]:
        return [text for _, _, text in self.pending]

    def poll(self, iteration):
        for it, name, text in self.pending:
            if it <= iteration:
                return name, text
        return None

    def _drop(self, name):
        self.pending = [e for e in self.pending if e[1] != name]

    def consumed(self, name, iteration):
        self._drop(name)
        self.history.append((iteration, name, "applied"))

    def rejected(self, name, iteration, diagnostics):
        self._drop(name)
        self.history.append((iteration, name, "rejected"))
