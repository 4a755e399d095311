"""Deterministic lexicon-based NER: longest match wins, word boundaries,
left-to-right non-overlapping scan."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ..core import Chunk, TagSpan, utf8_offsets

_TAG_TOKEN = re.compile(r"</?[A-Za-z][A-Za-z0-9_]*>")


class Matching(str, Enum):
    CASE_SENSITIVE = "case_sensitive"
    CASE_INSENSITIVE = "case_insensitive"


@dataclass(frozen=True)
class Lexicon:
    """category -> surface phrases. Longest match always wins."""

    entries: dict[str, tuple[str, ...]]
    matching: Matching = Matching.CASE_SENSITIVE
    longest_match_wins: bool = True

    def __post_init__(self) -> None:
        cleaned_entries: dict[str, tuple[str, ...]] = {}
        for category, phrases in self.entries.items():
            cleaned = tuple(p.strip() for p in phrases)
            if any(not p for p in cleaned):
                raise ValueError(f"empty phrase under {category!r}")
            bad = [p for p in cleaned if _TAG_TOKEN.search(p)]
            if bad:
                raise ValueError(f"phrase contains tag-token syntax: {bad[0]!r}")
            cleaned_entries[category] = cleaned
        object.__setattr__(self, "entries", cleaned_entries)

    def phrase_patterns(self) -> list[tuple[str, re.Pattern[str]]]:
        flags = re.IGNORECASE if self.matching is Matching.CASE_INSENSITIVE else 0
        out = []
        for category in sorted(self.entries):
            for phrase in self.entries[category]:
                # Word-boundary guarded; lookarounds keep matches overlappable.
                pat = re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)", flags)
                out.append((category, pat))
        return out


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def _find_candidates(text: str, lex: Lexicon) -> list[tuple[int, int, str]]:
    """(start, end, category) char-offset candidates with word boundaries.

    Case-sensitive lexicons use str.find (fast literal scan); the
    case-insensitive mode goes through regex to keep offsets exact.
    """
    candidates: list[tuple[int, int, str]] = []
    if lex.matching is Matching.CASE_INSENSITIVE:
        for category, pattern in lex.phrase_patterns():
            candidates.extend((m.start(), m.end(), category)
                              for m in pattern.finditer(text))
        return candidates
    for category in sorted(lex.entries):
        for phrase in lex.entries[category]:
            start = text.find(phrase)
            while start != -1:
                end = start + len(phrase)
                if (start == 0 or not _is_word_char(text[start - 1])) and \
                        (end == len(text) or not _is_word_char(text[end])):
                    candidates.append((start, end, category))
                start = text.find(phrase, start + 1)
    return candidates


def load_lexicon(path: str | Path,
                 matching: Matching = Matching.CASE_SENSITIVE) -> Lexicon:
    """Lexicon file: JSON ``{category: [phrases...]}``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return Lexicon(entries={k: tuple(v) for k, v in raw.items()}, matching=matching)


def tag_gazetteer(chunk: Chunk, lex: Lexicon) -> list[TagSpan]:
    """All non-overlapping longest-match lexicon hits, scanned left to right.

    Ties at the same start and length break by category name order. Offsets
    are UTF-8 byte offsets into the chunk text.
    """
    candidates = _find_candidates(chunk.text, lex)
    # start asc, longer first, then category name: exactly the tie rule.
    candidates.sort(key=lambda c: (c[0], -c[1], c[2]))
    offsets = utf8_offsets(chunk.text)
    spans: list[TagSpan] = []
    cursor = 0
    for start, end, category in candidates:
        if start < cursor:
            continue
        spans.append(TagSpan(category, offsets[start], offsets[end]))
        cursor = end
    return spans
