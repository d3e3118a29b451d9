"""Load, validate, filter, and split the petition dataset.

The on-disk schema is four columns: text (raw petition body), label
(1 = accepted, 0 = rejected), split (train/test/dev, with "development"
accepted case-insensitively as an alias for dev), and name (source filename
of shape "<year>_<caseno>.txt"). CSV input is parsed with full RFC-4180
quoting because petition texts routinely contain commas and newlines;
JSONL is the robust alternative.

A loaded Corpus is immutable; validation reports invariant violations as
data rather than raising, except for the hard load errors listed on
load_corpus (duplicate names break the embedding join key, so they abort).
"""

from __future__ import annotations

import csv
import json
import re
import sys
from dataclasses import dataclass
from typing import Iterable

from .errors import PetrankError

# Petition texts run to tens of thousands of words; the csv module's default
# field limit (128 KiB) is too small for them.
csv.field_size_limit(sys.maxsize)

SPLITS = ("train", "test", "dev")
COLUMNS = ("text", "label", "split", "name")

_NAME_RE = re.compile(r"^(\d{4})_([1-9]\d*)\.txt$")


class CorpusError(PetrankError):
    pass


class MissingColumn(CorpusError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing required column: {name!r}")


class BadLabel(CorpusError):
    def __init__(self, row: int, value):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: label {value!r} is not 0 or 1")


class DuplicateName(CorpusError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate record name: {name!r}")


class EmptyFile(CorpusError):
    pass


class EmptyResult(CorpusError):
    pass


class UnknownSplit(CorpusError):
    def __init__(self, which: str):
        self.which = which
        super().__init__(f"unknown split {which!r}; expected one of {SPLITS}")


@dataclass(frozen=True)
class PetitionRecord:
    text: str
    label: int
    split: str
    name: str


@dataclass(frozen=True)
class Provenance:
    source: str
    format: str


@dataclass(frozen=True)
class Corpus:
    records: tuple[PetitionRecord, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def names(self) -> list[str]:
        return [r.name for r in self.records]


@dataclass(frozen=True)
class Violation:
    row: int
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    total: int
    per_split: dict[str, int]
    accepted: int
    rejected: int
    violations: tuple[Violation, ...]

    def to_json(self) -> str:
        payload = {
            "total": self.total,
            "per_split": self.per_split,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "violations": [
                {"row": v.row, "rule": v.rule, "message": v.message}
                for v in self.violations
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def normalize_split(value: str) -> str:
    """Lowercase and map the "development" alias to "dev"; no other mapping."""
    s = value.strip().lower()
    return "dev" if s == "development" else s


def parse_name(name: str) -> tuple[int, int] | None:
    """Return (year, caseno) when name matches "<year>_<caseno>.txt", else None."""
    m = _NAME_RE.match(name)
    if not m:
        return None
    year, caseno = int(m.group(1)), int(m.group(2))
    if not 1800 <= year <= 2100:
        return None
    return year, caseno


def _parse_label(raw, row: int) -> int:
    if isinstance(raw, bool):
        raise BadLabel(row, raw)
    if isinstance(raw, int):
        value = raw
    else:
        text = str(raw).strip()
        try:
            value = int(text)
        except ValueError:
            raise BadLabel(row, raw) from None
    if value not in (0, 1):
        raise BadLabel(row, raw)
    return value


def _records_from_rows(rows: Iterable[dict], path: str, fmt: str) -> Corpus:
    records = []
    seen: set[str] = set()
    for i, row in enumerate(rows):
        for col in COLUMNS:
            if col not in row or row[col] is None:
                raise MissingColumn(col)
        name = str(row["name"])
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)
        records.append(
            PetitionRecord(
                text=str(row["text"]),
                label=_parse_label(row["label"], i),
                split=normalize_split(str(row["split"])),
                name=name,
            )
        )
    if not records:
        raise EmptyFile(f"no records in {path}")
    return Corpus(records=tuple(records), provenance=Provenance(source=str(path), format=fmt))


def load_corpus(path, format: str = "csv") -> Corpus:
    """Read a corpus file, preserving record order.

    Hard errors: MissingColumn, BadLabel (value outside {0, 1}),
    DuplicateName, EmptyFile. Everything else (bad names, unknown splits,
    empty texts) is left for validate() to report.
    """
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unsupported corpus format: {format!r}")
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise EmptyFile(f"no header in {path}")
            for col in COLUMNS:
                if col not in reader.fieldnames:
                    raise MissingColumn(col)
            return _records_from_rows(reader, path, "csv")
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return _records_from_rows(rows, path, "jsonl")


def validate(corpus: Corpus) -> ValidationReport:
    """Check every record invariant; violations are data, not failures.

    Counts (accepted/rejected, per-split) are computed over the rows that
    pass the corresponding rule, so total == accepted + rejected whenever
    there are no label violations.
    """
    violations: list[Violation] = []
    per_split = {s: 0 for s in SPLITS}
    accepted = rejected = 0
    seen: set[str] = set()
    for i, rec in enumerate(corpus.records):
        if rec.label == 1:
            accepted += 1
        elif rec.label == 0:
            rejected += 1
        else:
            violations.append(Violation(i, "label-domain", f"label {rec.label!r} not in {{0, 1}}"))
        if rec.split in per_split:
            per_split[rec.split] += 1
        else:
            violations.append(Violation(i, "split-domain", f"split {rec.split!r} not in {SPLITS}"))
        if parse_name(rec.name) is None:
            violations.append(Violation(i, "name-format", f"name {rec.name!r} is not '<year>_<caseno>.txt' with year in [1800, 2100]"))
        if rec.name in seen:
            violations.append(Violation(i, "name-duplicate", f"name {rec.name!r} repeats"))
        seen.add(rec.name)
        if not rec.text.strip():
            violations.append(Violation(i, "text-empty", "text is empty after trimming"))
    return ValidationReport(
        total=len(corpus.records),
        per_split=per_split,
        accepted=accepted,
        rejected=rejected,
        violations=tuple(violations),
    )


def filter_accepted(corpus: Corpus) -> Corpus:
    """Keep exactly the label-1 records, original order preserved."""
    kept = tuple(r for r in corpus.records if r.label == 1)
    if not kept:
        raise EmptyResult("corpus contains no accepted petitions")
    return Corpus(records=kept, provenance=corpus.provenance)


def split_view(corpus: Corpus, which: str) -> Corpus:
    """Subset with the given split tag; an empty view is not an error."""
    if which not in SPLITS:
        raise UnknownSplit(which)
    kept = tuple(r for r in corpus.records if r.split == which)
    return Corpus(records=kept, provenance=corpus.provenance)


def write_corpus_csv(corpus: Corpus, path) -> None:
    """Write the four-column CSV form (RFC-4180 quoting, UTF-8)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in corpus.records:
            writer.writerow([rec.text, rec.label, rec.split, rec.name])


def write_corpus_jsonl(corpus: Corpus, path) -> None:
    """Write the JSONL form: one object per line with the four keys."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in corpus.records:
            fh.write(
                json.dumps(
                    {"text": rec.text, "label": rec.label, "split": rec.split, "name": rec.name},
                    sort_keys=True,
                    ensure_ascii=False,
                )
                + "\n"
            )
