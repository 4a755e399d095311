"""Segment documents into chunks, de-duplicate, and reassemble tagged text.

Sentence segmentation is rule-based (terminal punctuation, closing
quotes/brackets, an abbreviation list, and a decimal guard) so chunking is
deterministic and dependency-free. Oversized single sentences are emitted
whole and logged, never split mid-sentence.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

from .core import Chunk, Document, TagforgeError, TaggedChunk, utf8_offsets
from .markup import MarkupPolicy, render_tagged_text
from .tokens import TokenEstimator

logger = logging.getLogger(__name__)


class EmptyDocument(TagforgeError):
    pass


class MissingTaggedChunk(TagforgeError):
    def __init__(self, chunk_hash: str):
        super().__init__(f"no tagged result for chunk hash {chunk_hash}")
        self.chunk_hash = chunk_hash


class Strategy(str, Enum):
    SENTENCE = "sentence"
    PARAGRAPH = "paragraph"
    TOKEN_WINDOW = "token_window"


@dataclass(frozen=True)
class ChunkingConfig:
    strategy: Strategy = Strategy.SENTENCE
    max_chunk_size: int = 250
    overlap: int = 0  # token_window only

    def __post_init__(self) -> None:
        if self.max_chunk_size < 1:
            raise ValueError("max_chunk_size must be >= 1")
        if self.overlap < 0 or self.overlap >= self.max_chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < max_chunk_size")
        if isinstance(self.strategy, str) and not isinstance(self.strategy, Strategy):
            object.__setattr__(self, "strategy", Strategy(self.strategy))


class Occurrence(NamedTuple):
    doc_id: str
    index: int
    start: int
    end: int


@dataclass
class OccurrenceMap:
    """Maps chunk hash -> every place that chunk (by normalized text) occurs."""

    entries: dict[str, list[Occurrence]] = field(default_factory=dict)

    def add(self, chunk: Chunk) -> None:
        self.entries.setdefault(chunk.hash, []).append(
            Occurrence(chunk.doc_id, chunk.index, chunk.start, chunk.end))

    def for_doc(self, doc_id: str) -> list[tuple[str, Occurrence]]:
        found = [(h, occ) for h, occs in self.entries.items()
                 for occ in occs if occ.doc_id == doc_id]
        found.sort(key=lambda pair: pair[1].start)
        return found


# Guard words that end with "." without ending a sentence. Single capital
# letters are deliberately not guarded: "A. B." must stay two sentences so
# short-sentence packing is reachable.
_ABBREVIATIONS = frozenset((
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc",
    "e.g", "i.e", "cf", "inc", "ltd", "co", "corp", "fig", "no", "al",
    "approx", "dept", "est", "min", "max",
))

_SENT_BREAK = re.compile(r"""([.!?]+)(["'”’)\]]*)(\s+)""")
_LAST_WORD = re.compile(r"([\w][\w.]*)\Z")
_PARA_BREAK = re.compile(r"\n[ \t]*\n[\s]*")


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Char-offset spans of sentences, excluding inter-sentence whitespace."""
    breaks: list[int] = []
    for m in _SENT_BREAK.finditer(text):
        end = m.end(2)  # after punctuation and any closing quotes/brackets
        if m.group(1) == ".":
            before = _LAST_WORD.search(text, max(0, m.start(1) - 12), m.start(1))
            if before:
                word = before.group(1).rstrip(".").lower()
                if word in _ABBREVIATIONS:
                    continue
                # Decimal guard: a dot wedged between digits never splits.
                if word[-1:].isdigit() and text[m.end(3):m.end(3) + 1].isdigit() \
                        and "\n" not in m.group(3):
                    continue
        breaks.append(end)
    spans = []
    cursor = 0
    for brk in breaks + [len(text)]:
        seg = text[cursor:brk]
        lead = len(seg) - len(seg.lstrip())
        trail = len(seg) - len(seg.rstrip())
        if seg.strip():
            spans.append((cursor + lead, brk - trail))
        cursor = brk
    return spans


def paragraph_spans(text: str) -> list[tuple[int, int]]:
    """Char-offset spans of paragraphs split on blank-line boundaries."""
    spans = []
    cursor = 0
    for m in _PARA_BREAK.finditer(text):
        seg = text[cursor:m.start()]
        if seg.strip():
            lead = len(seg) - len(seg.lstrip())
            spans.append((cursor + lead, cursor + len(seg.rstrip())))
        cursor = m.end()
    seg = text[cursor:]
    if seg.strip():
        lead = len(seg) - len(seg.lstrip())
        spans.append((cursor + lead, cursor + len(seg.rstrip())))
    return spans


def _pack_spans(text: str, spans: list[tuple[int, int]], cfg: ChunkingConfig,
                est: TokenEstimator) -> list[tuple[int, int]]:
    """Greedily pack unit spans into chunks whose estimate fits the budget.

    A single unit over budget is emitted alone (and logged); the estimate is
    taken over the packed slice including internal separators.
    """
    packed: list[tuple[int, int]] = []
    start = None
    end = None
    for s, e in spans:
        if start is None:
            start, end = s, e
            continue
        if est.estimate(text[start:e]) <= cfg.max_chunk_size:
            end = e
            continue
        packed.append((start, end))
        start, end = s, e
    if start is not None:
        packed.append((start, end))
    for s, e in packed:
        if est.estimate(text[s:e]) > cfg.max_chunk_size:
            logger.warning("oversized chunk (%d est tokens > %d) emitted whole",
                           est.estimate(text[s:e]), cfg.max_chunk_size)
    return packed


def _window_spans(text: str, cfg: ChunkingConfig, est: TokenEstimator) -> list[tuple[int, int]]:
    """Fixed token windows partitioning the whole text; optional overlap."""
    n = len(text)
    spans: list[tuple[int, int]] = []
    start = 0
    while start < n:
        lo, hi = start + 1, n
        while lo < hi:  # largest end with estimate within budget
            mid = (lo + hi + 1) // 2
            if est.estimate(text[start:mid]) <= cfg.max_chunk_size:
                lo = mid
            else:
                hi = mid - 1
        end = lo
        if end < n:
            # Prefer a whitespace cut in the tail quarter of the window.
            ws = text.rfind(" ", start + max(1, (end - start) * 3 // 4), end)
            if ws > start:
                end = ws + 1
        spans.append((start, end))
        if end >= n:
            break
        if cfg.overlap:
            back_lo, back_hi = start + 1, end - 1
            while back_lo < back_hi:  # smallest restart keeping est(tail) <= overlap
                mid = (back_lo + back_hi) // 2
                if est.estimate(text[mid:end]) <= cfg.overlap:
                    back_hi = mid
                else:
                    back_lo = mid + 1
            start = max(back_lo, start + 1)
        else:
            start = end
    return spans


def chunk(doc: Document, cfg: ChunkingConfig,
          estimator: TokenEstimator | None = None) -> list[Chunk]:
    """Segment ``doc`` under ``cfg``; chunks are ordered, non-overlapping
    (overlap=0), and cover all non-separator text."""
    if not doc.text.strip():
        raise EmptyDocument(f"document {doc.id!r} is empty or whitespace-only")
    est = estimator or TokenEstimator()
    if cfg.strategy is Strategy.SENTENCE:
        spans = _pack_spans(doc.text, sentence_spans(doc.text), cfg, est)
    elif cfg.strategy is Strategy.PARAGRAPH:
        spans = _pack_spans(doc.text, paragraph_spans(doc.text), cfg, est)
    elif cfg.strategy is Strategy.TOKEN_WINDOW:
        spans = _window_spans(doc.text, cfg, est)
    else:  # future semantic strategies plug in here
        raise TagforgeError(f"unsupported strategy {cfg.strategy}")
    offsets = utf8_offsets(doc.text)
    return [
        Chunk(doc_id=doc.id, index=i, start=offsets[s], end=offsets[e],
              text=doc.text[s:e])
        for i, (s, e) in enumerate(spans)
    ]


def dedup(chunks: Iterable[Chunk]) -> tuple[list[Chunk], OccurrenceMap]:
    """First-occurrence-ordered unique chunks plus the occurrence bookkeeping."""
    unique: list[Chunk] = []
    occ = OccurrenceMap()
    seen: set[str] = set()
    for c in chunks:
        occ.add(c)
        if c.hash not in seen:
            seen.add(c.hash)
            unique.append(c)
    return unique, occ


def reassemble(doc: Document, occ: OccurrenceMap,
               tagged: dict[str, TaggedChunk],
               policy: MarkupPolicy | None = None) -> str:
    """Rebuild ``doc`` with each chunk occurrence replaced by its tagged form.

    Separators between chunks are taken verbatim from the document, so
    stripping all tags from the result reproduces ``doc.text`` exactly.
    Duplicated chunks receive the markup computed once for their hash.
    """
    policy = policy or MarkupPolicy()
    data = doc.text.encode("utf-8")
    pieces: list[bytes] = []
    pos = 0
    for chunk_hash, where in occ.for_doc(doc.id):
        if where.start < pos:
            raise TagforgeError(
                f"overlapping occurrences in {doc.id!r}; reassembly needs overlap=0 chunks")
        if chunk_hash not in tagged:
            raise MissingTaggedChunk(chunk_hash)
        tc = tagged[chunk_hash]
        raw = data[where.start:where.end].decode("utf-8")
        spans = tc.spans
        if spans and raw != tc.chunk.text:
            # Non-byte-identical duplicate: span offsets don't transfer.
            logger.warning("dropping %d span(s) for non-identical duplicate of %s",
                           len(spans), chunk_hash[:12])
            spans = ()
        pieces.append(data[pos:where.start])
        pieces.append(render_tagged_text(raw, tc.chunk_labels, spans, policy).encode("utf-8"))
        pos = where.end
    pieces.append(data[pos:])
    return b"".join(pieces).decode("utf-8")
