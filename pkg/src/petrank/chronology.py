"""Find acceptance and first-proceeding dates in petition text and derive
the urgency target values.

Recognized date forms (case-insensitive, full month names or their
three-letter abbreviations):

    12 March 2008 | March 12, 2008 | 12/3/2008 | 12-3-2008 | 2008-03-12

Two-digit years are never guessed at (century ambiguity in legal archives),
and impossible calendar dates (month 13, 30 February) reject the whole
match. When two pattern matches overlap in the text, the earlier-starting
(then longer) match wins; all offsets are character offsets into the
unicode string, which keeps them in the same unit as window_chars.

A date is *anchored* to a keyword when it starts within window_chars after
the end of a whole-word, case-insensitive occurrence of that keyword. The
acceptance date is the earliest anchored calendar date for the acceptance
keyword class; the proceeding date is the earliest anchored calendar date
that is not before it. Ties on the calendar date break by offset, then by
keyword list order.

gap units are whole days; the two derived targets are

    rank_score_log            = ln(1 + gap_days)
    rank_score_inverse_square = 1 / max(gap_days, 1)^2

The max() clamp keeps the inverse-square score defined (and equal to 1) on
same-day proceedings while preserving the monotone ordering for gaps >= 1.
"""

from __future__ import annotations

import csv
import datetime
import math
import re
from dataclasses import dataclass

from .corpus import Corpus
from .errors import PetrankError

_MONTHS = {
    name: i + 1
    for i, name in enumerate(
        ["january", "february", "march", "april", "may", "june", "july",
         "august", "september", "october", "november", "december"]
    )
}
_MONTHS.update({name[:3]: num for name, num in list(_MONTHS.items())})
_MONTH_ALT = "|".join(sorted(_MONTHS, key=len, reverse=True))

# One entry per recognized form: (regex, group order) with groups named
# d/m/y; m may be a month name.
_DATE_PATTERNS = [
    re.compile(rf"\b(?P<d>\d{{1,2}})\s+(?P<m>{_MONTH_ALT})\s+(?P<y>\d{{4}})\b", re.IGNORECASE),
    re.compile(rf"\b(?P<m>{_MONTH_ALT})\s+(?P<d>\d{{1,2}}),\s*(?P<y>\d{{4}})\b", re.IGNORECASE),
    re.compile(r"\b(?P<d>\d{1,2})/(?P<m>\d{1,2})/(?P<y>\d{4})\b"),
    re.compile(r"\b(?P<d>\d{1,2})-(?P<m>\d{1,2})-(?P<y>\d{4})\b"),
    re.compile(r"\b(?P<y>\d{4})-(?P<m>\d{1,2})-(?P<d>\d{1,2})\b"),
]

DEFAULT_ACCEPTANCE_KEYWORDS = ("filed", "admitted", "instituted", "presented")
DEFAULT_PROCEEDING_KEYWORDS = ("hearing", "scheduled", "listed", "heard")


class ChronologyError(PetrankError):
    def __init__(self, message: str, trace: tuple["TraceEntry", ...] = ()):
        self.trace = trace
        super().__init__(message)


class NoAcceptanceDate(ChronologyError):
    pass


class NoProceedingDate(ChronologyError):
    pass


@dataclass(frozen=True)
class TraceEntry:
    keyword: str
    date: datetime.date
    offset: int


@dataclass(frozen=True)
class AnchorConfig:
    acceptance_keywords: tuple[str, ...] = DEFAULT_ACCEPTANCE_KEYWORDS
    proceeding_keywords: tuple[str, ...] = DEFAULT_PROCEEDING_KEYWORDS
    window_chars: int = 120

    def __post_init__(self):
        if not self.acceptance_keywords or not self.proceeding_keywords:
            raise ValueError("keyword lists must be non-empty")
        if self.window_chars < 1:
            raise ValueError("window_chars must be >= 1")


@dataclass(frozen=True)
class ChronologyFacts:
    acceptance_date: datetime.date
    proceeding_date: datetime.date
    gap_days: int
    rank_score_log: float
    rank_score_inverse_square: float
    extraction_trace: tuple[TraceEntry, ...] = ()


def rank_scores(gap_days: int) -> tuple[float, float]:
    """(log score, inverse-square score) for a whole-day gap."""
    if gap_days < 0:
        raise ValueError("gap_days must be nonnegative")
    return math.log(1 + gap_days), 1.0 / max(gap_days, 1) ** 2


def facts_from_dates(
    acceptance: datetime.date,
    proceeding: datetime.date,
    trace: tuple[TraceEntry, ...] = (),
) -> ChronologyFacts:
    gap = abs((proceeding - acceptance).days)
    log_score, inv_sq = rank_scores(gap)
    return ChronologyFacts(
        acceptance_date=acceptance,
        proceeding_date=proceeding,
        gap_days=gap,
        rank_score_log=log_score,
        rank_score_inverse_square=inv_sq,
        extraction_trace=trace,
    )


def _to_date(groups: dict[str, str]) -> datetime.date | None:
    m = groups["m"].lower()
    month = _MONTHS.get(m) if not m.isdigit() else int(m)
    if month is None:
        return None
    try:
        return datetime.date(int(groups["y"]), month, int(groups["d"]))
    except ValueError:
        return None


def find_dates(text: str) -> list[tuple[datetime.date, int]]:
    """All recognized, calendar-valid dates with their character offsets.

    Overlapping matches are resolved earliest-start first, longer match
    preferred; the result is ordered by offset.
    """
    raw: list[tuple[int, int, datetime.date]] = []
    for pattern in _DATE_PATTERNS:
        for m in pattern.finditer(text):
            date = _to_date(m.groupdict())
            if date is not None:
                raw.append((m.start(), m.end(), date))
    raw.sort(key=lambda t: (t[0], -(t[1] - t[0])))
    out: list[tuple[datetime.date, int]] = []
    last_end = -1
    for start, end, date in raw:
        if start >= last_end:
            out.append((date, start))
            last_end = end
    return out


def _anchored(
    text: str,
    dates: list[tuple[datetime.date, int]],
    keywords: tuple[str, ...],
    window: int,
) -> list[tuple[datetime.date, int, int]]:
    """(date, offset, keyword index) for every date anchored by a keyword."""
    hits = []
    for ki, kw in enumerate(keywords):
        kw_re = re.compile(rf"\b{re.escape(kw)}\b", re.IGNORECASE)
        for occ in kw_re.finditer(text):
            for date, off in dates:
                if 0 <= off - occ.end() <= window:
                    hits.append((date, off, ki))
    return hits


def extract_chronology(text: str, anchors: AnchorConfig | None = None) -> ChronologyFacts:
    """Locate the anchored acceptance and proceeding dates and derive scores."""
    cfg = anchors or AnchorConfig()
    dates = find_dates(text)
    acc_hits = _anchored(text, dates, cfg.acceptance_keywords, cfg.window_chars)
    proc_hits = _anchored(text, dates, cfg.proceeding_keywords, cfg.window_chars)
    trace = tuple(
        TraceEntry(keyword=kws[ki], date=d, offset=off)
        for hits, kws in ((acc_hits, cfg.acceptance_keywords), (proc_hits, cfg.proceeding_keywords))
        for d, off, ki in hits
    )
    if not acc_hits:
        raise NoAcceptanceDate("no date anchored by an acceptance keyword", trace)
    acceptance = min(acc_hits)[0]
    eligible = [h for h in proc_hits if h[0] >= acceptance]
    if not eligible:
        raise NoProceedingDate(
            "no proceeding date on or after the acceptance date", trace
        )
    proceeding = min(eligible)[0]
    return facts_from_dates(acceptance, proceeding, trace)


def chronologize_corpus(
    corpus: Corpus, anchors: AnchorConfig | None = None
) -> tuple[dict[str, ChronologyFacts], list[tuple[str, str]]]:
    """Per-record extraction; failures become exclusions, never imputations.

    The target itself derives from these dates, so a record that fails
    extraction is dropped from training with a logged reason.
    """
    table: dict[str, ChronologyFacts] = {}
    exclusions: list[tuple[str, str]] = []
    for rec in corpus:
        try:
            table[rec.name] = extract_chronology(rec.text, anchors)
        except ChronologyError as exc:
            exclusions.append((rec.name, f"{type(exc).__name__}: {exc}"))
    return table, exclusions


CHRONOLOGY_CSV_COLUMNS = (
    "name",
    "acceptance_date",
    "proceeding_date",
    "gap_days",
    "rank_score_log",
    "rank_score_inverse_square",
)


def write_chronology_csv(table: dict[str, ChronologyFacts], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CHRONOLOGY_CSV_COLUMNS)
        for name, facts in table.items():
            writer.writerow(
                [
                    name,
                    facts.acceptance_date.isoformat(),
                    facts.proceeding_date.isoformat(),
                    facts.gap_days,
                    repr(facts.rank_score_log),
                    repr(facts.rank_score_inverse_square),
                ]
            )


def read_chronology_csv(path) -> dict[str, ChronologyFacts]:
    table: dict[str, ChronologyFacts] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            table[row["name"]] = ChronologyFacts(
                acceptance_date=datetime.date.fromisoformat(row["acceptance_date"]),
                proceeding_date=datetime.date.fromisoformat(row["proceeding_date"]),
                gap_days=int(row["gap_days"]),
                rank_score_log=float(row["rank_score_log"]),
                rank_score_inverse_square=float(row["rank_score_inverse_square"]),
            )
    return table
