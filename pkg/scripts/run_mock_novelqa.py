#!/usr/bin/env python3
"""Mock MCQ experiment: truncation, filtering, and complexity grouping.

Builds a synthetic book plus questions with known evidence offsets, runs
baseline/TD/TD_TC against an oracle gateway, and prints the per-complexity
table. Evidence beyond the truncation budget drops its question, exactly
as a real over-window book would.
"""

from __future__ import annotations

import argparse
import random
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tagforge.bench import (
    Complexity,
    MCQInstance,
    PromptMode,
    accuracy_table,
    novelqa_tasks,
    run_eval,
)
from tagforge.bench.synth import synthetic_corpus
from tagforge.cache import TagCache
from tagforge.chunking import ChunkingConfig
from tagforge.core import Document
from tagforge.gateway import MockGateway
from tagforge.pipeline import ContextTagger
from tagforge.report import emit_report
from tagforge.taggers import TaggerConfig, TaggerKind, load_categories
from tagforge.taggers.gazetteer import load_lexicon

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def synthetic_book(seed: int) -> Document:
    docs = synthetic_corpus(n_docs=12, sentences_per_doc=60, seed=seed)
    return Document(id="novel-0", text=" ".join(d.text for d in docs))


def synthetic_mcq(book: Document, n: int, seed: int) -> list[MCQInstance]:
    rng = random.Random(seed)
    data = book.text.encode("utf-8")
    instances = []
    for i in range(n):
        evidence = rng.randrange(len(data) // 8 * 7)
        gold = "ABCD"[i % 4]
        instances.append(MCQInstance(
            book_id=book.id,
            question=f"Synthetic plot question {i}: which option is recorded?",
            options={letter: f"option {letter.lower()}{i}" for letter in "ABCD"},
            gold=gold,
            complexity=list(Complexity)[i % 3],
            evidence_offset=evidence))
    return instances


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--questions", type=int, default=60)
    parser.add_argument("--budget", type=int, default=6000)
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    book = synthetic_book(args.seed)
    instances = synthetic_mcq(book, args.questions, args.seed)
    categories = load_categories(FIXTURES / "categories_privileged.json")
    lexicon = load_lexicon(FIXTURES / "lexicon.json")

    def oracle(req):
        for inst in instances:
            if inst.question in req.user:
                return inst.gold
        return ""

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="novelqa-mock-"))
    workdir.mkdir(parents=True, exist_ok=True)
    tagger = ContextTagger(
        ChunkingConfig(max_chunk_size=250),
        TaggerConfig(kind=TaggerKind.GAZETTEER, categories=tuple(categories)),
        cache=TagCache(workdir / "tagcache"), lexicon=lexicon)
    tasks = novelqa_tasks(book, instances, categories,
                          modes=(PromptMode.BASELINE, PromptMode.TD, PromptMode.TD_TC),
                          budget=args.budget, tagger=tagger)
    kept = len(tasks) // 3
    print(f"{len(instances)} questions, {kept} kept after truncation -> {workdir}")
    records = run_eval(tasks, MockGateway(fn=oracle), workdir / "records.jsonl")
    emit_report(records, workdir / "report", tagger="gazetteer")

    table = accuracy_table(records, "prompt_mode,complexity")
    for (mode, cpx) in sorted(table):
        print(f"{mode:9s} {cpx:11s} {table[(mode, cpx)]:6.2f}")
    print(f"report: {workdir / 'report.md'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
