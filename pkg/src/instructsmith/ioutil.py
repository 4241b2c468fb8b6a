"""Small file helpers: atomic writes and line-delimited JSON."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

log = logging.getLogger(__name__)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file + rename, so readers never
    observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str | Path, obj: Any, *, indent: int = 2) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=indent) + "\n")


def atomic_write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    """Atomically write one JSON object per line. Returns the row count."""
    lines = [json.dumps(row, ensure_ascii=False) for row in rows]
    text = "".join(line + "\n" for line in lines)
    atomic_write_text(path, text)
    return len(lines)


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def iter_jsonl(path: str | Path, *, tolerate_torn_tail: bool = False) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, parsed_object)`` for each non-blank line.

    With ``tolerate_torn_tail`` a trailing line that fails to parse is ignored
    (a crash may have torn the last append); a malformed line elsewhere raises.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    for i, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        try:
            yield i, json.loads(stripped)
        except json.JSONDecodeError:
            if tolerate_torn_tail and i == len(lines):
                return
            raise


def repair_torn_tail(path: str | Path) -> int:
    """Truncate a final line that lacks its newline terminator.

    A crash can kill a process mid-append, leaving a partial last line. Every
    complete append ends in a newline, so an unterminated tail is torn by
    definition — even if the fragment happens to parse as JSON. Dropping it
    restores the all-lines-complete invariant; the lost record is redone by
    the caller's resume logic. Returns the number of bytes removed.
    """
    path = Path(path)
    try:
        size = path.stat().st_size
    except FileNotFoundError:
        return 0
    if size == 0:
        return 0
    with open(path, "rb+") as fh:
        fh.seek(size - 1)
        if fh.read(1) == b"\n":
            return 0
        keep = 0
        pos = size
        while pos > 0:
            step = min(1 << 16, pos)
            fh.seek(pos - step)
            cut = fh.read(step).rfind(b"\n")
            if cut != -1:
                keep = pos - step + cut + 1
                break
            pos -= step
        fh.truncate(keep)
    removed = size - keep
    log.warning("%s: dropped torn final line (%d bytes)", path, removed)
    return removed


class JsonlAppender:
    """Append-only JSONL writer that flushes every line.

    A flush pushes each record to the OS, so a killed process loses at most
    the line being written. Opening repairs any torn tail a previous crash
    left behind, so appends never continue a partial line.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        repair_torn_tail(self.path)
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    def append(self, row: dict) -> None:
        self._fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "JsonlAppender":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
