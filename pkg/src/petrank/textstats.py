"""Deterministic tokenization, normalization, and per-petition text statistics.

Normative definitions used throughout the package:

* A *word token* is a maximal run of Unicode letters and digits (word
  characters excluding the underscore). Everything else is a separator.
* A *sentence* is a maximal segment terminated by '.', '?', '!' or end of
  text that contains at least one word token. Legal abbreviations such as
  "No." or "vs." over-split under this rule; that is accepted because the
  count is a coarse feature and the rule is deterministic.
* Statistics are computed on the raw text. Normalization (lowercasing,
  stopword removal, stemming) is reserved for the leakage audit.

Stemmer rules (fixed, applied per token, longest-suffix first within each
step; a rule fires only if the remaining stem keeps at least 3 characters):

  step 1, plurals:   "sses" -> "ss" ; "ies" -> "i" ; "es" -> "" ;
                     "s" -> "" (but never after "ss")
  step 2, verb forms: "ing" -> "" ; "ed" -> "" ; after stripping, a trailing
                     doubled consonant is undoubled ("running" -> "run").

This is intentionally far smaller than a full Porter stemmer: no downstream
numeric feature depends on stemmed tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import PetrankError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]")
_VOWELS = frozenset("aeiou")


class EmptyText(PetrankError):
    """Raised for whitespace-only input where statistics are undefined."""


@dataclass(frozen=True)
class TextStats:
    word_count: int
    sentence_count: int
    avg_word_length: float


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = False
    strip_non_alphanumeric: bool = False
    remove_stopwords: bool = False
    stem: bool = False
    stopword_list: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.remove_stopwords and not self.stopword_list:
            raise ValueError("remove_stopwords requires a non-empty stopword_list")


def tokenize(text: str) -> list[str]:
    """Split text into word tokens (maximal alphanumeric runs), order preserved."""
    return _TOKEN_RE.findall(text)


def _strip_suffix_once(token: str, suffixes: tuple[str, ...]) -> str:
    for suf in suffixes:
        if token.endswith(suf) and len(token) - len(suf) >= 3:
            return token[: -len(suf)]
    return token


def _undouble(token: str) -> str:
    if len(token) >= 4 and token[-1] == token[-2] and token[-1] not in _VOWELS:
        return token[:-1]
    return token


def stem(token: str) -> str:
    """Apply the fixed suffix-stripping rules documented in the module docstring."""
    t = token
    # step 1: plurals
    if t.endswith("sses") and len(t) >= 5:
        t = t[:-2]
    elif t.endswith("ies") and len(t) - 2 >= 3:
        t = t[:-2]
    elif not t.endswith("ss"):
        t = _strip_suffix_once(t, ("es", "s"))
    # step 2: gerund / past forms
    stripped = _strip_suffix_once(t, ("ing", "ed"))
    if stripped != t:
        t = _undouble(stripped)
    return t


def normalize(tokens: list[str], cfg: NormalizationConfig) -> list[str]:
    """Apply, in order: lowercase, strip, stopword removal, stemming.

    The all-false config is the identity on any token list.
    """
    out = tokens
    if cfg.lowercase:
        out = [t.lower() for t in out]
    if cfg.strip_non_alphanumeric:
        stripped = ("".join(_TOKEN_RE.findall(t)) for t in out)
        out = [t for t in stripped if t]
    if cfg.remove_stopwords:
        out = [t for t in out if t not in cfg.stopword_list]
    if cfg.stem:
        out = [stem(t) for t in out]
    return list(out)


def text_statistics(text: str) -> TextStats:
    """Compute word/sentence counts and mean token length on raw text.

    sentence_count is clamped to >= 1 for non-empty text so the TextStats
    invariant holds even for token-free punctuation like "...".
    """
    if not text.strip():
        raise EmptyText("text is empty or whitespace-only")
    tokens = tokenize(text)
    word_count = len(tokens)
    sentence_count = sum(
        1 for seg in _SENTENCE_SPLIT_RE.split(text) if _TOKEN_RE.search(seg)
    )
    sentence_count = max(sentence_count, 1)
    if word_count:
        avg = sum(len(t) for t in tokens) / word_count
    else:
        avg = 0.0
    return TextStats(word_count=word_count, sentence_count=sentence_count, avg_word_length=avg)


def load_stopwords(path) -> frozenset[str]:
    """Read a stopword list, one token per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def default_stopwords() -> frozenset[str]:
    """The English stopword list shipped with the package."""
    from importlib.resources import files

    text = files("petrank.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())
