"""Client side of the external NER bridge protocol.

The bridge is any child process speaking line-delimited JSON over stdio:
one handshake line, then one response object per request object, in order.
Responses carry raw NER labels with UTF-8 byte offsets; mapping labels to
tag categories happens here, via EntityLabelMap.
"""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..core import Chunk, TagforgeError, TaggedChunk, TagSpan, is_char_boundary
from ..markup import resolve_collisions
from . import TaggerConfig
from .llm import TagStats

logger = logging.getLogger(__name__)

PROTOCOL_NAME = "tagforge-bridge"
PROTOCOL_VERSION = 1


class BridgeUnavailable(TagforgeError):
    pass


class ProtocolError(TagforgeError):
    def __init__(self, line: str, reason: str):
        super().__init__(f"{reason}: {line[:120]!r}")
        self.line = line
        self.reason = reason


class MappingMissing(TagforgeError):
    def __init__(self, label: str):
        super().__init__(f"no category mapping or drop rule for NER label {label!r}")
        self.label = label


@dataclass(frozen=True)
class EntityLabelMap:
    """NER label -> category name, with explicit per-label drop rules."""

    mapping: dict[str, str]
    drop: frozenset[str] = frozenset()

    def resolve(self, label: str) -> str | None:
        if label in self.drop:
            return None
        if label not in self.mapping:
            raise MappingMissing(label)
        return self.mapping[label]


def default_label_map() -> EntityLabelMap:
    data = resources.files("tagforge").joinpath("data/label_map_default.json")
    raw = json.loads(data.read_text(encoding="utf-8"))
    return EntityLabelMap(mapping=dict(raw["mapping"]), drop=frozenset(raw.get("drop", ())))


def load_label_map(path: str | Path) -> EntityLabelMap:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return EntityLabelMap(mapping=dict(raw["mapping"]), drop=frozenset(raw.get("drop", ())))


class SubprocessBridge:
    """Spawn a bridge process and exchange one JSON object per line."""

    def __init__(self, cmd: Sequence[str]):
        try:
            self._proc = subprocess.Popen(
                list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise BridgeUnavailable(f"cannot launch bridge {cmd!r}: {exc}") from exc
        self.handshake = self._read()

    def _read(self) -> dict:
        assert self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            raise BridgeUnavailable("bridge closed its stdout")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(line, f"undecodable bridge line ({exc})") from exc

    def request(self, obj: dict) -> dict:
        assert self._proc.stdin is not None
        self._proc.stdin.write(json.dumps(obj, ensure_ascii=False) + "\n")
        self._proc.stdin.flush()
        return self._read()

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "SubprocessBridge":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass
class ReplayBridge:
    """Serves committed bridge dialogues keyed by request text; no process.

    Fixture layout: {"handshake": {...}, "exchanges": [{"request", "response"}]}.
    """

    handshake: dict
    _by_text: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBridge":
        with open(path, encoding="utf-8") as fh:
            fixture = json.load(fh)
        bridge = cls(handshake=fixture["handshake"])
        for exchange in fixture["exchanges"]:
            bridge._by_text[exchange["request"]["text"]] = exchange["response"]
        return bridge

    def request(self, obj: dict) -> dict:
        text = obj.get("text", "")
        if text not in self._by_text:
            raise ProtocolError(json.dumps(obj)[:120], "no recorded exchange for request")
        response = dict(self._by_text[text])
        response["id"] = obj.get("id")
        return response

    def close(self) -> None:
        pass


def _check_handshake(handshake: dict) -> None:
    if handshake.get("protocol") != PROTOCOL_NAME:
        raise ProtocolError(json.dumps(handshake), "wrong protocol name in handshake")
    if handshake.get("version") != PROTOCOL_VERSION:
        raise ProtocolError(json.dumps(handshake),
                            f"bridge protocol version {handshake.get('version')} != {PROTOCOL_VERSION}")


def tag_external(chunks: Iterable[Chunk], cfg: TaggerConfig,
                 bridge: SubprocessBridge | ReplayBridge,
                 label_map: EntityLabelMap | None = None,
                 stats: TagStats | None = None) -> list[TaggedChunk]:
    """Tag chunks through a bridge; invalid spans are dropped with a warning
    count, order is preserved, and labels go through the EntityLabelMap."""
    stats = stats if stats is not None else TagStats()
    label_map = label_map or default_label_map()
    _check_handshake(bridge.handshake)
    known = cfg.category_names()
    out: list[TaggedChunk] = []
    for i, chunk in enumerate(chunks):
        request_id = f"{i}:{chunk.hash[:12]}"
        response = bridge.request({
            "id": request_id,
            "text": chunk.text,
            "categories": [{"name": c.name, "definition": c.definition,
                            "examples": list(c.examples)} for c in cfg.categories],
        })
        if response.get("error"):
            raise ProtocolError(json.dumps(response), f"bridge error: {response['error']}")
        if response.get("id") != request_id:
            raise ProtocolError(json.dumps(response),
                                f"out-of-order response (want {request_id})")
        data = chunk.text.encode("utf-8")
        spans: list[TagSpan] = []
        for ent in response.get("entities", ()):
            category = label_map.resolve(str(ent.get("label", "")))
            if category is None:
                continue
            start, end = int(ent.get("start", -1)), int(ent.get("end", -1))
            valid = (0 <= start < end <= len(data)
                     and is_char_boundary(data, start) and is_char_boundary(data, end)
                     and category in known)
            if not valid:
                stats.dropped_spans += 1
                logger.warning("dropping invalid bridge span %s on chunk %s",
                               ent, chunk.hash[:12])
                continue
            spans.append(TagSpan(category, start, end))
        stats.tagger_calls += 1
        out.append(TaggedChunk(chunk=chunk, spans=resolve_collisions(spans),
                               provenance=cfg.provenance()))
    return out
