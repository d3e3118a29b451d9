"""Minimal reader for the four-column petition corpus files.

Schema contract shared with the ranking pipeline: CSV with header
text,label,split,name (RFC-4180 quoting, UTF-8) or JSONL with one object
per line carrying those keys. Only the fields the exporter needs (text and
the name join key) are interpreted; everything else passes through
untouched.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass

csv.field_size_limit(sys.maxsize)

REQUIRED_COLUMNS = ("text", "label", "split", "name")


class CorpusFormatError(Exception):
    pass


@dataclass(frozen=True)
class CorpusRow:
    name: str
    text: str


def read_corpus(path, format: str = "csv") -> list[CorpusRow]:
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unsupported corpus format: {format!r}")
    rows: list[CorpusRow] = []
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return []
            missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise CorpusFormatError(f"missing columns in {path}: {missing}")
            for raw in reader:
                rows.append(CorpusRow(name=str(raw["name"]), text=str(raw["text"])))
        return rows
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            missing = [c for c in REQUIRED_COLUMNS if c not in raw]
            if missing:
                raise CorpusFormatError(f"missing keys in {path}: {missing}")
            rows.append(CorpusRow(name=str(raw["name"]), text=str(raw["text"])))
    return rows
