"""LLM-based tagging: classification (labels only), IE (inline tags lifted
to spans behind a fidelity gate), and the hybrid union of both.

The IE path never retries a fidelity failure with different sampling: the
decoding contract is deterministic, so a retry would repeat the failure.
A failed case is downgraded to spans=[] with the original text kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..core import Chunk, TagforgeError, TaggedChunk
from ..gateway import CompletionRequest, Gateway
from ..markup import extract_spans, resolve_collisions, verify_fidelity
from . import TaggerConfig
from .prompts import (
    FewShot,
    PromptTemplate,
    UnparseableOutput,
    build_classification_prompt,
    build_ie_prompt,
    parse_classification_output,
)

logger = logging.getLogger(__name__)


class ChunkMismatch(TagforgeError):
    pass


@dataclass
class TagStats:
    """Counters surfaced in run manifests; mutated in place by taggers."""

    tagger_calls: int = 0
    cache_hits: int = 0
    parse_failures: int = 0
    fidelity_failures: int = 0
    rejected_labels: int = 0
    dropped_spans: int = 0
    oversized_chunks: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "tagger_calls": self.tagger_calls,
            "cache_hits": self.cache_hits,
            "parse_failures": self.parse_failures,
            "fidelity_failures": self.fidelity_failures,
            "rejected_labels": self.rejected_labels,
            "dropped_spans": self.dropped_spans,
            "oversized_chunks": self.oversized_chunks,
            **self.extra,
        }


def _template(cfg: TaggerConfig, default_id: str) -> PromptTemplate:
    # params stay JSON-serializable (they are hashed), so templates are
    # referenced by id: a builtin name or a path to a text file.
    template_id = cfg.params.get("template_id")
    if template_id is None:
        return PromptTemplate.builtin(default_id)
    if template_id in ("classification", "ie"):
        return PromptTemplate.builtin(template_id)
    return PromptTemplate.load(template_id)


def _fewshot(cfg: TaggerConfig) -> tuple[FewShot, ...]:
    return tuple(FewShot(text=t, labels=tuple(ls))
                 for t, ls in cfg.params.get("fewshot", ()))


def _request(cfg: TaggerConfig, prompt: str) -> CompletionRequest:
    return CompletionRequest(
        system="",
        user=prompt,
        max_output_tokens=int(cfg.params.get("max_output_tokens", 256)),
        temperature=float(cfg.params.get("temperature", 0.0)),
        thinking=bool(cfg.params.get("thinking", False)),
        model_id=str(cfg.params.get("model_id", "")),
    )


def tag_llm_classification(chunk: Chunk, cfg: TaggerConfig, gateway: Gateway,
                           stats: TagStats | None = None) -> TaggedChunk:
    """Chunk-level labels from the classification prompt; text untouched.

    One retry on unparseable output, then the empty label set is recorded
    along with a parse failure.
    """
    stats = stats if stats is not None else TagStats()
    prompt = build_classification_prompt(
        chunk.text, cfg.categories,
        template=_template(cfg, "classification"), fewshot=_fewshot(cfg))
    req = _request(cfg, prompt)
    labels: frozenset[str] = frozenset()
    for attempt in (1, 2):
        result = gateway.complete(req)
        try:
            parsed = parse_classification_output(result.text, cfg.categories)
        except UnparseableOutput:
            if attempt == 2:
                stats.parse_failures += 1
                logger.warning("classification output unparseable for chunk %s",
                               chunk.hash[:12])
            continue
        labels = parsed.labels
        stats.rejected_labels += len(parsed.rejected)
        break
    return TaggedChunk(chunk=chunk, chunk_labels=labels, provenance=cfg.provenance())


def _candidate_markups(raw: str) -> list[str]:
    candidates = [raw]
    stripped = raw.strip()
    if stripped != raw:
        candidates.append(stripped)
    if stripped.startswith("```") and stripped.endswith("```"):
        inner = stripped[3:-3]
        first_nl = inner.find("\n")
        if first_nl != -1 and inner[:first_nl].strip().isalnum():
            inner = inner[first_nl + 1:]  # drop a language hint line
        candidates.append(inner.strip("\n"))
    return candidates


def tag_llm_ie(chunk: Chunk, cfg: TaggerConfig, gateway: Gateway,
               stats: TagStats | None = None) -> TaggedChunk:
    """Inline-tagged echo lifted into spans, gated on exact fidelity.

    Hallucinated tags, altered text, or unbalanced markup downgrade the
    result to spans=[] with fidelity_failed set; the original chunk text is
    always what ends up in the result.
    """
    stats = stats if stats is not None else TagStats()
    prompt = build_ie_prompt(chunk.text, cfg.categories,
                             template=_template(cfg, "ie"))
    result = gateway.complete(_request(cfg, prompt))
    names = cfg.category_names()
    for marked in _candidate_markups(result.text):
        report = verify_fidelity(chunk.text, marked, names)
        if report.ok:
            spans = resolve_collisions(extract_spans(chunk.text, marked, names))
            return TaggedChunk(chunk=chunk, spans=spans, provenance=cfg.provenance())
    stats.fidelity_failures += 1
    return TaggedChunk(chunk=chunk, spans=(), provenance=cfg.provenance(),
                       fidelity_failed=True)


def merge_hybrid(ie: TaggedChunk, cls: TaggedChunk | frozenset[str] | set[str],
                 provenance: str | None = None) -> TaggedChunk:
    """Union of the two sub-taggers over one chunk.

    Spans come from the IE side when its fidelity held; chunk labels are the
    classification labels plus the categories of kept spans.
    """
    if isinstance(cls, TaggedChunk):
        if cls.chunk.hash != ie.chunk.hash:
            raise ChunkMismatch(
                f"hybrid inputs disagree: {ie.chunk.hash[:12]} vs {cls.chunk.hash[:12]}")
        cls_labels = cls.chunk_labels
        cls_prov = cls.provenance
    else:
        cls_labels = frozenset(cls)
        cls_prov = "labels"
    spans = () if ie.fidelity_failed else ie.spans
    labels = frozenset(cls_labels) | {s.category for s in spans}
    return TaggedChunk(
        chunk=ie.chunk, chunk_labels=labels, spans=spans,
        provenance=provenance or f"hybrid[{ie.provenance}+{cls_prov}]",
        fidelity_failed=ie.fidelity_failed)


def tag_hybrid(chunk: Chunk, cfg: TaggerConfig, gateway: Gateway,
               stats: TagStats | None = None) -> TaggedChunk:
    ie = tag_llm_ie(chunk, cfg, gateway, stats)
    cls = tag_llm_classification(chunk, cfg, gateway, stats)
    return merge_hybrid(ie, cls, provenance=cfg.provenance())
