"""Content-addressed persistent cache for tagging results.

One checksummed JSON file per entry under a two-level hex fan-out; writers
use write-temp-then-rename so concurrent processes are safe without locks.
Keys are value-addressed, so entries can never go stale.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .core import HASH_ALGO, TagforgeError, TaggedChunk, canonical_json, digest_of

logger = logging.getLogger(__name__)


class CacheKeyMismatch(TagforgeError):
    pass


@dataclass(frozen=True)
class CacheKey:
    """Identity of one tagging result: who tagged (kind, version, config)
    and what was tagged (chunk content hash)."""

    tagger_kind: str
    tagger_version: str
    config_hash: str
    chunk_hash: str

    @property
    def digest(self) -> str:
        return digest_of({
            "tagger_kind": self.tagger_kind,
            "tagger_version": self.tagger_version,
            "config_hash": self.config_hash,
            "chunk_hash": self.chunk_hash,
        })


@dataclass
class CacheStats:
    entries: int = 0
    bytes: int = 0
    hits: int = 0
    misses: int = 0


class TagCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / f"{digest}.json"

    def get(self, key: CacheKey) -> TaggedChunk | None:
        path = self._path(key.digest)
        try:
            raw = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            with self._lock:
                self.misses += 1
            return None
        try:
            entry = json.loads(raw)
            payload = entry["payload"]
            checksum = hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
            if checksum != entry["checksum"]:
                raise ValueError("checksum mismatch")
            value = TaggedChunk.from_dict(payload)
        except (ValueError, KeyError, TypeError) as exc:
            # Torn or corrupt entry: treat as a miss, keep going.
            logger.warning("corrupt cache entry %s (%s); treating as miss", path.name, exc)
            with self._lock:
                self.misses += 1
            return None
        with self._lock:
            self.hits += 1
        return value

    def put(self, key: CacheKey, value: TaggedChunk) -> None:
        if value.chunk.hash != key.chunk_hash:
            raise CacheKeyMismatch(
                f"value chunk hash {value.chunk.hash[:12]} != key chunk hash {key.chunk_hash[:12]}")
        if key.config_hash and key.config_hash not in value.provenance:
            raise CacheKeyMismatch("value provenance does not carry the key's config hash")
        payload = value.to_dict()
        entry = {
            "hash_algo": HASH_ALGO,
            "checksum": hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest(),
            "payload": payload,
        }
        path = self._path(key.digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

    def _entries(self) -> list[Path]:
        return sorted(self.root.glob("*/*.json"))

    def stats(self) -> CacheStats:
        entries = self._entries()
        return CacheStats(entries=len(entries),
                          bytes=sum(p.stat().st_size for p in entries),
                          hits=self.hits, misses=self.misses)

    def gc(self, max_bytes: int) -> int:
        """Delete oldest entries until the store fits ``max_bytes``."""
        entries = [(p.stat().st_mtime, p.stat().st_size, p) for p in self._entries()]
        total = sum(size for _, size, _ in entries)
        removed = 0
        for _, size, path in sorted(entries):
            if total <= max_bytes:
                break
            path.unlink(missing_ok=True)
            total -= size
            removed += 1
        return removed
