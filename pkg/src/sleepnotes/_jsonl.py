"""Line-delimited JSON helpers shared by the file readers and writers.

Readers stream one record per line and report malformed input with the
1-based line number so batch jobs can point at the offending record.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class InputFormatError(Exception):
    """A line of an input file could not be parsed or is missing fields."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        self.message = message
        super().__init__(f"{self.path}, line {line_no}: {message}")


def read_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_no, record) for each non-blank line of a JSONL file."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(path, line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise InputFormatError(path, line_no, "expected a JSON object")
            yield line_no, record


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records as one JSON object per line; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


def require_field(record: dict[str, Any], name: str, path: str | Path, line_no: int) -> Any:
    """Fetch a required field, raising InputFormatError if absent."""
    if name not in record:
        raise InputFormatError(path, line_no, f"missing required field '{name}'")
    return record[name]
