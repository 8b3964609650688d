"""Readers for the harness output files.

The harness writes three documented formats: per-scenario ``results.jsonl``
records, and the summary CSVs under ``summary/``.  Every loader validates the
columns it needs and fails with a :class:`SchemaError` naming the first
missing one, so a stale or foreign file is rejected before anything is drawn.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the documented harness schema."""

    def __init__(self, path: Path, column: str):
        self.path = Path(path)
        self.column = column
        super().__init__(f"{path}: missing required column {column!r}")


def read_csv(path: Path, required: tuple[str, ...]) -> list[dict]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    header = rows[0].keys() if rows else ()
    if not rows:
        # an empty table still must carry the expected header
        with path.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
    for col in required:
        if col not in header:
            raise SchemaError(path, col)
    return rows


def read_jsonl(path: Path, required: tuple[str, ...]) -> list[dict]:
    path = Path(path)
    records = [json.loads(line) for line in
               path.read_text(encoding="utf-8").splitlines() if line]
    for rec in records:
        for col in required:
            if col not in rec:
                raise SchemaError(path, col)
    return records


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
