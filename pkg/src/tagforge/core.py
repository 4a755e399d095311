"""Shared domain types, text normalization, and content hashing.

Offsets everywhere in this package are UTF-8 *byte* offsets constrained to
character boundaries. Normalization exists only to define dedup/hash
equality; markup and reassembly always operate on the original text.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# Fixed content-hash algorithm, recorded in every cache entry and artifact
# header so a future algorithm change cannot silently invalidate stores.
HASH_ALGO = "sha256"

CATEGORY_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class TagforgeError(Exception):
    """Base class for all operational errors raised by this package."""


def normalize(text: str) -> str:
    """Normalize text for dedup/hash equality.

    Unicode NFC, CRLF/CR collapsed to LF, leading/trailing whitespace
    trimmed. Internal whitespace runs are preserved. Total function.
    """
    text = unicodedata.normalize("NFC", text)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return text.strip()


def content_hash(text: str) -> str:
    """Hex sha256 digest of ``normalize(text)``; the identity used by dedup
    and the tag cache. Stable across platforms and releases."""
    return hashlib.sha256(normalize(text).encode("utf-8")).hexdigest()


def canonical_json(obj: object) -> str:
    """Deterministic JSON rendering used for config hashing and cache keys."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(obj: object) -> str:
    """sha256 hex digest of the canonical JSON of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _char_width(cp: int) -> int:
    if cp < 0x80:
        return 1
    if cp < 0x800:
        return 2
    if cp < 0x10000:
        return 3
    return 4


def utf8_offsets(text: str) -> list[int]:
    """Cumulative UTF-8 byte offset of each codepoint.

    ``offsets[i]`` is the byte offset of codepoint ``i``;
    ``offsets[len(text)]`` is the total byte length.
    """
    offsets = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        pos += _char_width(ord(ch))
        offsets[i + 1] = pos
    return offsets


def byte_length(text: str) -> int:
    return len(text.encode("utf-8"))


def is_char_boundary(data: bytes, pos: int) -> bool:
    """True if ``pos`` falls on a UTF-8 character boundary of ``data``."""
    if pos <= 0 or pos >= len(data):
        return 0 <= pos <= len(data)
    return not 0x80 <= data[pos] < 0xC0


@dataclass(frozen=True)
class Document:
    """A whole input document; the unit of ingestion and reassembly."""

    id: str
    text: str
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("Document.id must be nonempty")


@dataclass(frozen=True)
class Chunk:
    """A contiguous segment of a document; the unit of tagging and dedup.

    ``start``/``end`` are byte offsets into the document's UTF-8 text and
    always satisfy ``doc_bytes[start:end] == text.encode()``.
    """

    doc_id: str
    index: int
    start: int
    end: int
    text: str
    hash: str = ""

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad chunk offsets [{self.start}, {self.end})")
        if not self.text:
            raise ValueError("Chunk.text must be nonempty")
        if not self.hash:
            object.__setattr__(self, "hash", content_hash(self.text))


@dataclass(frozen=True)
class TagCategory:
    """A named semantic category; the name doubles as the markup element name."""

    name: str
    definition: str = ""
    examples: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not CATEGORY_NAME_RE.match(self.name):
            raise ValueError(f"invalid category name {self.name!r}")
        if not isinstance(self.examples, tuple):
            object.__setattr__(self, "examples", tuple(self.examples))


@dataclass(frozen=True)
class TagSpan:
    """An entity-level tag over ``[start, end)`` byte offsets of a chunk's text."""

    category: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span offsets [{self.start}, {self.end})")


@dataclass(frozen=True)
class TaggedChunk:
    """A chunk plus its chunk-level labels and/or entity-level spans.

    Spans are kept sorted by (start asc, end desc) and must be pairwise
    disjoint or nested; taggers resolve collisions before constructing one.
    """

    chunk: Chunk
    chunk_labels: frozenset[str] = frozenset()
    spans: tuple[TagSpan, ...] = ()
    provenance: str = ""
    fidelity_failed: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.chunk_labels, frozenset):
            object.__setattr__(self, "chunk_labels", frozenset(self.chunk_labels))
        ordered = tuple(sorted(self.spans, key=lambda s: (s.start, -s.end, s.category)))
        object.__setattr__(self, "spans", ordered)
        limit = byte_length(self.chunk.text)
        prev: list[TagSpan] = []
        for span in ordered:
            if span.end > limit:
                raise ValueError(f"span {span} exceeds chunk length {limit}")
            while prev and prev[-1].end <= span.start:
                prev.pop()
            if prev and prev[-1].end < span.end:
                raise ValueError(f"partial overlap between {prev[-1]} and {span}")
            prev.append(span)

    def to_dict(self) -> dict:
        return {
            "chunk": {
                "doc_id": self.chunk.doc_id,
                "index": self.chunk.index,
                "start": self.chunk.start,
                "end": self.chunk.end,
                "text": self.chunk.text,
                "hash": self.chunk.hash,
            },
            "chunk_labels": sorted(self.chunk_labels),
            "spans": [[s.category, s.start, s.end] for s in self.spans],
            "provenance": self.provenance,
            "fidelity_failed": self.fidelity_failed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaggedChunk":
        return cls(
            chunk=Chunk(**data["chunk"]),
            chunk_labels=frozenset(data.get("chunk_labels", ())),
            spans=tuple(TagSpan(c, s, e) for c, s, e in data.get("spans", ())),
            provenance=data.get("provenance", ""),
            fidelity_failed=bool(data.get("fidelity_failed", False)),
        )


def read_documents_jsonl(path: str | Path) -> list[Document]:
    """Load a corpus: one ``{"id", "text", "meta"}`` object per line."""
    docs = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            doc = Document(id=rec["id"], text=rec["text"], meta=dict(rec.get("meta", {})))
            if doc.id in seen:
                raise TagforgeError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_documents_jsonl(path: str | Path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.id, "text": doc.text, "meta": doc.meta},
                                ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
