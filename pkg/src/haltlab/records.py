"""JSON-lines experiment records.

One object per line, keys sorted, floats written with 17 significant digits,
and the wall-clock time confined to the ``timestamp`` field so that two runs
of the same configuration can be compared with that one field dropped.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from . import __version__

RESULTS_ENV = "HALTLAB_RESULTS"
DEFAULT_RESULTS = "haltlab-results.jsonl"
TIMESTAMP_KEY = "timestamp"
REQUIRED_KEYS = {"protocol", "params", "outcome", "version", TIMESTAMP_KEY}


class RecordError(ValueError):
    pass


def _encode(obj: Any) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise RecordError(f"non-finite float {obj!r} cannot be recorded")
        text = format(obj, ".17g")
        if "." not in text and "e" not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        for k, _ in items:
            if not isinstance(k, str):
                raise RecordError(f"record keys must be strings, got {k!r}")
        return "{" + ",".join(f"{json.dumps(k, ensure_ascii=False)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise RecordError(f"cannot record value of type {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Canonical single-line JSON text for ``obj``."""
    return _encode(obj)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class ExperimentReport:
    protocol: str
    params: dict
    outcome: dict
    version: str = __version__
    timestamp: str = field(default_factory=utc_now)

    def to_record(self) -> dict:
        return {
            "protocol": self.protocol,
            "params": self.params,
            "outcome": self.outcome,
            "version": self.version,
            TIMESTAMP_KEY: self.timestamp,
        }

    def to_line(self) -> str:
        return dumps(self.to_record())

    @classmethod
    def from_record(cls, rec: dict) -> "ExperimentReport":
        validate_record(rec)
        return cls(rec["protocol"], rec["params"], rec["outcome"], rec["version"], rec[TIMESTAMP_KEY])


def without_timestamp(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if k != TIMESTAMP_KEY}


def validate_record(rec: Any) -> None:
    if not isinstance(rec, dict):
        raise RecordError("record is not a JSON object")
    missing = REQUIRED_KEYS - rec.keys()
    if missing:
        raise RecordError(f"record missing keys: {sorted(missing)}")
    extra = rec.keys() - REQUIRED_KEYS
    if extra:
        raise RecordError(f"record has unexpected keys: {sorted(extra)}")
    if not isinstance(rec["protocol"], str):
        raise RecordError("protocol must be a string")
    for key in ("params", "outcome"):
        if not isinstance(rec[key], dict):
            raise RecordError(f"{key} must be an object")
    try:
        datetime.fromisoformat(rec[TIMESTAMP_KEY])
    except (TypeError, ValueError) as exc:
        raise RecordError(f"bad timestamp: {rec[TIMESTAMP_KEY]!r}") from exc


def results_path(explicit: str | os.PathLike | None = None) -> Path:
    return Path(explicit or os.environ.get(RESULTS_ENV) or DEFAULT_RESULTS)


def append_record(path: str | os.PathLike, report: ExperimentReport) -> str:
    """Append one record with a single ``write`` on an ``O_APPEND`` descriptor."""
    line = report.to_line()
    data = (line + "\n").encode("utf-8")
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        written = os.write(fd, data)
        if written != len(data):
            raise OSError(f"short write to {path}: {written} of {len(data)} bytes")
    finally:
        os.close(fd)
    return line


def read_records(path: str | os.PathLike) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                yield lineno, json.loads(line)
