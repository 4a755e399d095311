"""Evaluation execution: task construction, scoring, incremental persistence.

Runs append one JSONL record per scored instance as soon as it finishes, so
an interrupted run can be resumed; already-scored instance ids are skipped
and the final record set equals an uninterrupted run's.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from ..core import Document, TagCategory, utf8_offsets
from ..chunking import ChunkingConfig, chunk as chunk_document
from ..gateway import CompletionRequest, Gateway, GatewayError
from ..pipeline import ContextTagger
from ..tokens import TokenEstimator
from .haystack import (
    HaystackSpec,
    NeedleSpec,
    PromptMode,
    assemble_prompt,
    build_haystack,
    snippet_pool,
)
from .scoring import extract_mcq_letter, score_contains, score_mcq

logger = logging.getLogger(__name__)


class Complexity(str, Enum):
    SINGLE_HOP = "single_hop"
    MULTI_HOP = "multi_hop"
    DETAIL = "detail"


@dataclass(frozen=True)
class MCQInstance:
    book_id: str
    question: str
    options: dict[str, str]  # exactly the keys A-D
    gold: str
    complexity: Complexity
    evidence_offset: int = 0

    def __post_init__(self) -> None:
        if sorted(self.options) != ["A", "B", "C", "D"]:
            raise ValueError("options must be exactly A-D")
        if self.gold not in ("A", "B", "C", "D"):
            raise ValueError("gold must be one of A-D")
        if isinstance(self.complexity, str) and not isinstance(self.complexity, Complexity):
            object.__setattr__(self, "complexity", Complexity(self.complexity))


@dataclass(frozen=True)
class EvalRecord:
    instance_id: str
    prompt_mode: str
    context_length: int | None = None
    complexity: str | None = None
    response: str = ""
    score: int | None = None
    usage: tuple[int, int] = (0, 0)
    error: str | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (self.score is None) == (self.error is None):
            raise ValueError("score must be present exactly when there is no error")

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id, "prompt_mode": self.prompt_mode,
            "context_length": self.context_length, "complexity": self.complexity,
            "response": self.response, "score": self.score,
            "usage": list(self.usage), "error": self.error, "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        return cls(instance_id=data["instance_id"], prompt_mode=data["prompt_mode"],
                   context_length=data.get("context_length"),
                   complexity=data.get("complexity"),
                   response=data.get("response", ""), score=data.get("score"),
                   usage=tuple(data.get("usage", (0, 0))),
                   error=data.get("error"), flags=tuple(data.get("flags", ())))


def truncate_and_filter(book: Document, instances: Sequence[MCQInstance],
                        budget: int, cfg: ChunkingConfig | None = None,
                        estimator: TokenEstimator | None = None
                        ) -> tuple[Document, list[MCQInstance]]:
    """Cut the book at the last chunk boundary within the token budget and
    drop instances whose evidence lies beyond the cut."""
    est = estimator or TokenEstimator()
    cfg = cfg or ChunkingConfig()
    if est.estimate(book.text) <= budget:
        return book, list(instances)
    chunks = chunk_document(book, cfg, est)
    offsets = utf8_offsets(book.text)
    byte_to_char = {b: i for i, b in enumerate(offsets)}
    cut_byte = 0
    for c in chunks:
        prefix_chars = byte_to_char[c.end]
        if est.estimate(book.text[:prefix_chars]) > budget:
            break
        cut_byte = c.end
    truncated = Document(id=book.id,
                         text=book.text[:byte_to_char[cut_byte]],
                         meta={**book.meta, "truncated_at_byte": str(cut_byte)})
    kept = [inst for inst in instances if inst.evidence_offset < cut_byte]
    removed = len(instances) - len(kept)
    if removed:
        logger.info("truncation of %s removed %d/%d instances",
                    book.id, removed, len(instances))
    return truncated, kept


@dataclass
class EvalTask:
    """One instance x prompt mode, lazily built at execution time."""

    instance_id: str
    prompt_mode: str
    context_length: int | None
    complexity: str | None
    build: Callable[[], tuple[str, str]]  # -> (system, user)
    score: Callable[[str], tuple[int, tuple[str, ...]]]  # response -> (score, flags)
    max_output_tokens: int = 256
    thinking: bool = False
    model_id: str = ""

    def execute(self, gateway: Gateway) -> EvalRecord:
        try:
            system, user = self.build()
            result = gateway.complete(CompletionRequest(
                system=system, user=user, max_output_tokens=self.max_output_tokens,
                temperature=0.0 if not self.thinking else 1.0,
                thinking=self.thinking, model_id=self.model_id))
            score, flags = self.score(result.text)
            return EvalRecord(instance_id=self.instance_id, prompt_mode=self.prompt_mode,
                              context_length=self.context_length, complexity=self.complexity,
                              response=result.text, score=score, usage=tuple(result.usage),
                              flags=flags)
        except GatewayError as exc:
            return EvalRecord(instance_id=self.instance_id, prompt_mode=self.prompt_mode,
                              context_length=self.context_length, complexity=self.complexity,
                              error=f"{type(exc).__name__}: {exc}")


def _contains_scorer(gold: tuple[str, ...]) -> Callable[[str], tuple[int, tuple[str, ...]]]:
    def scorer(response: str) -> tuple[int, tuple[str, ...]]:
        flags = ("empty_response",) if not response.strip() else ()
        return score_contains(response, gold), flags

    return scorer


def _mcq_scorer(gold: str) -> Callable[[str], tuple[int, tuple[str, ...]]]:
    def scorer(response: str) -> tuple[int, tuple[str, ...]]:
        flags: tuple[str, ...] = ()
        if not response.strip():
            flags += ("empty_response",)
        if extract_mcq_letter(response) is None:
            flags += ("unparseable",)
        return score_mcq(response, gold), flags

    return scorer


def nolima_tasks(needles: Sequence[NeedleSpec], corpus: Sequence[Document],
                 categories: Sequence[TagCategory], *,
                 context_lengths: Sequence[int] = (250, 500, 16000, 32000),
                 modes: Sequence[PromptMode] = (PromptMode.BASELINE,),
                 positions: int = 26,
                 position_for: Callable[[int], int] | None = None,
                 seed: int = 0,
                 tagger: ContextTagger | None = None,
                 estimator: TokenEstimator | None = None,
                 max_output_tokens: int = 256) -> list[EvalTask]:
    """Instance grid for haystack QA. One position per (needle, CL) by
    default (rotating over the position set); pass ``position_for`` to
    override."""
    corpus = tuple(corpus)
    est = estimator or TokenEstimator()
    pos_of = position_for or (lambda i: i % positions)
    pool = snippet_pool(corpus)  # shared across every instance build
    tasks: list[EvalTask] = []
    for n_idx, needle in enumerate(needles):
        for cl in context_lengths:
            position = pos_of(n_idx)
            spec = HaystackSpec(needle=needle, context_length=cl,
                                position_index=position, positions=positions,
                                source_corpus=corpus, seed=seed)
            for mode in modes:
                mode = PromptMode(mode)
                if mode is PromptMode.TD_TC and tagger is None:
                    raise ValueError("TD_TC tasks need a ContextTagger")

                def build(spec=spec, mode=mode) -> tuple[str, str]:
                    doc = build_haystack(spec, est, pool=pool)
                    context = doc.text
                    if mode is PromptMode.TD_TC:
                        context = tagger.tag_document(doc)
                    return assemble_prompt(context, spec.needle.question, mode, categories)

                tasks.append(EvalTask(
                    instance_id=f"{needle.id}:cl{cl}:pos{position}:{mode.value}",
                    prompt_mode=mode.value, context_length=cl, complexity=None,
                    build=build, score=_contains_scorer(needle.gold_answers),
                    max_output_tokens=max_output_tokens))
    return tasks


MCQ_ANSWER_INSTRUCTION = "Answer with a single letter: A, B, C, or D."


def format_mcq_question(instance: MCQInstance) -> str:
    lines = [instance.question]
    for letter in ("A", "B", "C", "D"):
        lines.append(f"{letter}. {instance.options[letter]}")
    lines.append(MCQ_ANSWER_INSTRUCTION)
    return "\n".join(lines)


def novelqa_tasks(book: Document, instances: Sequence[MCQInstance],
                  categories: Sequence[TagCategory], *,
                  modes: Sequence[PromptMode] = (PromptMode.BASELINE,),
                  budget: int | None = None,
                  chunk_cfg: ChunkingConfig | None = None,
                  tagger: ContextTagger | None = None,
                  estimator: TokenEstimator | None = None,
                  max_output_tokens: int = 8) -> list[EvalTask]:
    """MCQ tasks over one (possibly truncated) book."""
    est = estimator or TokenEstimator()
    if budget is not None:
        book, instances = truncate_and_filter(book, instances, budget, chunk_cfg, est)
    tagged_text: dict[str, str] = {}

    def context_for(mode: PromptMode) -> str:
        if mode is not PromptMode.TD_TC:
            return book.text
        if "tagged" not in tagged_text:
            if tagger is None:
                raise ValueError("TD_TC tasks need a ContextTagger")
            tagged_text["tagged"] = tagger.tag_document(book)
        return tagged_text["tagged"]

    tasks: list[EvalTask] = []
    for q_idx, inst in enumerate(instances):
        question_block = format_mcq_question(inst)
        for mode in modes:
            mode = PromptMode(mode)

            def build(mode=mode, question_block=question_block) -> tuple[str, str]:
                return assemble_prompt(context_for(mode), question_block, mode, categories)

            tasks.append(EvalTask(
                instance_id=f"{inst.book_id}:q{q_idx}:{mode.value}",
                prompt_mode=mode.value, context_length=None,
                complexity=inst.complexity.value,
                build=build, score=_mcq_scorer(inst.gold),
                max_output_tokens=max_output_tokens))
    return tasks


def read_records(path: str | Path) -> list[EvalRecord]:
    records = []
    path = Path(path)
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(EvalRecord.from_dict(json.loads(line)))
    return records


def run_eval(tasks: Sequence[EvalTask], gateway: Gateway,
             out_path: str | Path | None = None,
             resume: bool = True) -> list[EvalRecord]:
    """Execute every task, persisting each record as soon as it is scored.

    Per-instance gateway errors are recorded and the run continues; anything
    else (including interrupts) propagates, leaving the records file ready
    for a resumed run.
    """
    done: dict[str, EvalRecord] = {}
    fh = None
    if out_path is not None:
        out_path = Path(out_path)
        if resume:
            for rec in read_records(out_path):
                done[rec.instance_id] = rec
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(out_path, "a", encoding="utf-8")
    records: list[EvalRecord] = list(done.values())
    try:
        for task in tasks:
            if task.instance_id in done:
                continue
            record = task.execute(gateway)
            records.append(record)
            done[task.instance_id] = record
            if fh is not None:
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return records
