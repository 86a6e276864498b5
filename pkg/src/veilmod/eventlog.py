"""Append-only JSONL event log.

One record per line. Records carry a contiguous sequence number so any gap
or mid-file garbage is detectable; a torn final line (crash mid-write) is
recoverable by discarding just that line.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .clock import SystemClock
from .errors import InvalidParameterError, LogCorruptionError

KINDS = frozenset(
    ["session_started", "task_served", "reveal", "response", "survey", "session_completed"]
)

_REQUIRED_KEYS = frozenset(["seq", "kind", "at_ms", "payload"])


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    at_ms: int
    payload: dict

    def to_json(self) -> str:
        body = {"seq": self.seq, "kind": self.kind, "at_ms": self.at_ms, "payload": self.payload}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


def _parse_line(line: str) -> Optional[EventRecord]:
    """Return the record, or None when the line is not a complete record."""
    try:
        body = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(body, dict) or not _REQUIRED_KEYS.issubset(body):
        return None
    if body["kind"] not in KINDS:
        return None
    return EventRecord(
        seq=body["seq"], kind=body["kind"], at_ms=body["at_ms"], payload=body["payload"]
    )


def _scan(path: Path):
    """Parse a log file.

    Returns (records, skipped, good_end). `skipped` is 1 when the final line
    was torn and dropped, else 0. `good_end` is the byte offset just past the
    last intact record. Anything unreadable before the final line, or any
    sequence gap, raises LogCorruptionError.
    """
    records: list[EventRecord] = []
    skipped = 0
    good_end = 0
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw:
        return records, skipped, good_end
    lines = raw.split(b"\n")
    # A well-formed file ends with a newline, so the last split element is empty.
    trailing_complete = lines[-1] == b""
    if trailing_complete:
        lines = lines[:-1]
    offset = 0
    for i, line_bytes in enumerate(lines):
        is_last = i == len(lines) - 1
        record = _parse_line(line_bytes.decode("utf-8", errors="replace"))
        if record is None or (is_last and not trailing_complete):
            if is_last:
                skipped = 1
                break
            raise LogCorruptionError(f"unreadable record at line {i + 1} of {path}")
        expected = records[-1].seq + 1 if records else 1
        if record.seq != expected:
            raise LogCorruptionError(
                f"sequence gap at line {i + 1} of {path}: expected {expected}, found {record.seq}"
            )
        records.append(record)
        offset += len(line_bytes) + 1
        good_end = offset
    return records, skipped, good_end


def replay(path) -> tuple[list[EventRecord], int]:
    """Read every intact record from a log file.

    Returns (records, skipped) where skipped counts the dropped torn tail
    (0 or 1). Raises LogCorruptionError for damage anywhere else.
    """
    path = Path(path)
    if not path.exists():
        return [], 0
    records, skipped, _ = _scan(path)
    return records, skipped


class EventLog:
    """Single-writer append log bound to one file.

    Opening an existing file replays it (recovered records are kept on
    `.recovered`), truncates any torn tail, and resumes the sequence.
    Appends are serialized by a lock and fsynced before returning, so an
    acknowledged record survives a crash.
    """

    def __init__(self, path, clock=None):
        self.path = Path(path)
        self._clock = clock if clock is not None else SystemClock()
        self._lock = threading.Lock()
        self.recovered: list[EventRecord] = []
        self.recovered_skipped = 0
        if self.path.exists():
            records, skipped, good_end = _scan(self.path)
            self.recovered = records
            self.recovered_skipped = skipped
            if skipped:
                with open(self.path, "r+b") as fh:
                    fh.truncate(good_end)
        self._seq = self.recovered[-1].seq if self.recovered else 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "ab")

    def append(self, kind: str, payload: dict, at_ms: Optional[int] = None) -> EventRecord:
        if kind not in KINDS:
            raise InvalidParameterError(f"unknown event kind: {kind!r}")
        with self._lock:
            self._seq += 1
            record = EventRecord(
                seq=self._seq,
                kind=kind,
                at_ms=self._clock.now_ms() if at_ms is None else int(at_ms),
                payload=payload,
            )
            self._fh.write(record.to_json().encode("utf-8") + b"\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            return record

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def iter_kind(records: Iterable[EventRecord], kind: str) -> Iterable[EventRecord]:
    return (r for r in records if r.kind == kind)
