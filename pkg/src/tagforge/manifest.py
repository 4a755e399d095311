"""Run provenance: a manifest JSON emitted next to every CLI output."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .core import HASH_ALGO, canonical_json, digest_of

TOOL_VERSION = "0.1.0"

COUNTER_NAMES = ("documents", "chunks", "unique_chunks", "tagger_calls",
                 "cache_hits", "parse_failures", "fidelity_failures",
                 "rejected_labels", "dropped_spans", "oversized_chunks")


@dataclass
class RunManifest:
    config: dict
    category_set_hash: str = ""
    cache_stats: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""

    def __post_init__(self) -> None:
        if not self.started_at:
            self.started_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        for name in COUNTER_NAMES:
            self.counts.setdefault(name, 0)

    def finish(self) -> None:
        self.finished_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def to_dict(self) -> dict:
        return {
            "tool_version": TOOL_VERSION,
            "hash_algo": HASH_ALGO,
            "config": json.loads(canonical_json(self.config)),
            "config_hash": digest_of(self.config),
            "category_set_hash": self.category_set_hash,
            "cache_stats": self.cache_stats,
            "counts": self.counts,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        if not self.finished_at:
            self.finish()
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path
