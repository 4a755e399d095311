"""Build needle-in-a-haystack instances and assemble evaluation prompts.

Haystacks are seeded-deterministic concatenations of corpus sentences with
the needle inserted at the snippet boundary nearest the requested position
fraction. The filler draw ignores position, so for a fixed (seed, needle,
context length) the needle's offset is monotone in the position index.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from ..core import Document, TagCategory, TagforgeError, canonical_json
from ..chunking import sentence_spans
from ..tokens import RunningEstimate, TokenEstimator


class CorpusTooSmall(TagforgeError):
    pass


class NeedleCollision(TagforgeError):
    pass


class PromptMode(str, Enum):
    BASELINE = "baseline"
    TD = "td"
    TD_TC = "td_tc"


@dataclass(frozen=True)
class NeedleSpec:
    id: str
    needle_text: str
    question: str
    gold_answers: tuple[str, ...]
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.needle_text or not self.gold_answers:
            raise ValueError("needle_text and gold_answers must be nonempty")
        for name in ("gold_answers", "keywords"):
            if not isinstance(getattr(self, name), tuple):
                object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True)
class HaystackSpec:
    needle: NeedleSpec
    context_length: int
    position_index: int
    source_corpus: tuple[Document, ...]
    positions: int = 26
    prompt_mode: PromptMode = PromptMode.BASELINE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.positions < 2:
            raise ValueError("positions must be >= 2")
        if not 0 <= self.position_index < self.positions:
            raise ValueError("position_index out of range")
        if not isinstance(self.source_corpus, tuple):
            object.__setattr__(self, "source_corpus", tuple(self.source_corpus))

    @property
    def fraction(self) -> float:
        return self.position_index / (self.positions - 1)


def _derived_seed(seed: int, needle_id: str, context_length: int) -> int:
    # Position is deliberately excluded: all positions share one filler.
    blob = canonical_json({"seed": seed, "needle": needle_id, "cl": context_length})
    return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "big")


def snippet_pool(corpus: Sequence[Document]) -> list[str]:
    pool = []
    for doc in corpus:
        pool.extend(doc.text[s:e] for s, e in sentence_spans(doc.text))
    return pool


def _trim_to_fit(snippet: str, running: "RunningEstimate", budget: int) -> str | None:
    """Longest word-boundary prefix of ``snippet`` that still fits ``budget``
    when appended to the running filler estimate."""
    best: str | None = None
    acc = ""
    for word in snippet.split(" "):
        candidate = word if not acc else acc + " " + word
        if running.peek(candidate) > budget:
            break
        acc = candidate
        best = candidate
    return best


def build_haystack(spec: HaystackSpec,
                   estimator: TokenEstimator | None = None,
                   pool: Sequence[str] | None = None) -> Document:
    """Deterministic haystack within +/-2% of the token budget, with the
    needle appearing exactly once at the boundary nearest its fraction.

    ``pool`` lets callers reuse one snippet pool across many builds; it must
    be ``snippet_pool(spec.source_corpus)`` or equivalent.
    """
    est = estimator or TokenEstimator()
    needle = spec.needle.needle_text
    if pool is None:
        pool = snippet_pool(spec.source_corpus)
    pool = [s for s in pool if needle not in s]
    if not pool:
        raise CorpusTooSmall("no usable snippets in source corpus")

    budget = spec.context_length
    tolerance = max(1, round(budget * 0.02))
    needle_tokens = est.estimate(needle)
    filler_budget = budget - needle_tokens - 1  # one separator allowance
    if filler_budget <= 0:
        raise CorpusTooSmall(
            f"context length {budget} cannot hold the needle ({needle_tokens} tokens)")

    rng = random.Random(_derived_seed(spec.seed, spec.needle.id, spec.context_length))
    pieces: list[str] = []
    running = RunningEstimate(est)
    attempts = 0
    futile = 0
    max_attempts = max(1000, len(pool) * 4)
    while attempts < max_attempts and futile < 20:
        remaining = filler_budget - running.value()
        if remaining <= 0:
            break
        snippet = pool[rng.randrange(len(pool))]
        attempts += 1
        if running.peek(snippet) <= filler_budget:
            pieces.append(snippet)
            running.add(snippet)
            futile = 0
            continue
        trimmed = _trim_to_fit(snippet, running, filler_budget)
        if trimmed is None:
            futile += 1
            continue
        pieces.append(trimmed)
        running.add(trimmed)
        futile = 0

    if not pieces:
        raise CorpusTooSmall("filler budget too small for any snippet")

    # Boundary k (0..len(pieces)) nearest the target token fraction.
    walker = RunningEstimate(est)
    cumulative = [0]
    for piece in pieces:
        walker.add(piece)
        cumulative.append(walker.value())
    target = spec.fraction * budget
    k = min(range(len(cumulative)), key=lambda i: (abs(cumulative[i] - target), i))
    assembled = " ".join((*pieces[:k], needle, *pieces[k:])) if 0 < k < len(pieces) \
        else (needle + " " + " ".join(pieces) if k == 0
              else " ".join(pieces) + " " + needle)

    if assembled.count(needle) != 1:
        raise NeedleCollision(f"needle {spec.needle.id} not unique in built haystack")
    final_tokens = est.estimate(assembled)
    if abs(final_tokens - budget) > tolerance:
        raise CorpusTooSmall(
            f"assembled {final_tokens} tokens for budget {budget} (+/-{tolerance})")

    return Document(
        id=f"{spec.needle.id}.cl{spec.context_length}.pos{spec.position_index}",
        text=assembled,
        meta={
            "needle_id": spec.needle.id,
            "context_length": str(spec.context_length),
            "position_index": str(spec.position_index),
            "positions": str(spec.positions),
            "seed": str(spec.seed),
            "needle_offset": str(assembled.index(needle)),
        },
    )


_BASELINE_SYSTEM = (
    "You answer questions about a provided text. Use only the text itself; "
    "answer briefly and directly.")

_TD_SYSTEM = (
    "You answer questions about a provided text. Use only the text itself; "
    "answer briefly and directly.\n\n"
    "The following semantic tag definitions describe the kinds of "
    "information that matter for the task. Keep them in mind while reading:\n"
    "{categories}")

_TD_TC_SYSTEM = (
    "You answer questions about a provided text. Use only the text itself; "
    "answer briefly and directly.\n\n"
    "The text has been annotated with XML-style semantic tags. The tag "
    "definitions are:\n{categories}\n\n"
    "Use the tags to locate relevant passages; they are markers only and "
    "not part of the original text.")


def _categories_block(categories: Iterable[TagCategory]) -> str:
    lines = []
    for cat in categories:
        line = f"- <{cat.name}>: {cat.definition}" if cat.definition else f"- <{cat.name}>"
        if cat.examples:
            line += " Examples: " + ", ".join(f'"{e}"' for e in cat.examples) + "."
        lines.append(line)
    return "\n".join(lines)


def assemble_prompt(context_text: str, question: str, mode: PromptMode,
                    categories: Sequence[TagCategory] = ()) -> tuple[str, str]:
    """(system, user) for one evaluation call.

    Baseline carries no category material at all; TD and TD_TC embed the
    category list in the system prompt; TD_TC expects tagged context and
    logs a warning when none of the category tags appear in it.
    """
    mode = PromptMode(mode)
    if mode is PromptMode.BASELINE:
        system = _BASELINE_SYSTEM
    elif mode is PromptMode.TD:
        system = _TD_SYSTEM.format(categories=_categories_block(categories))
    else:
        system = _TD_TC_SYSTEM.format(categories=_categories_block(categories))
        if categories and not any(f"<{c.name}>" in context_text for c in categories):
            import logging

            logging.getLogger(__name__).warning(
                "TD_TC prompt assembled over context with no tag tokens")
    user = f"{context_text}\n\nQuestion: {question}"
    return system, user
