#!/usr/bin/env python3
"""Mock haystack-QA experiment: the full pipeline on synthetic data.

Runs the 58-needle suite at the standard context lengths for all three
prompt settings, against an oracle gateway (no credentials needed), then
prints the summary table. A scratch directory holds the records, manifest,
and tag cache. Swap --gateway to http to point the identical run at a real
model endpoint.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tagforge.bench import PromptMode, accuracy_table, nolima_tasks, run_eval
from tagforge.bench.synth import synthetic_corpus, synthetic_needles
from tagforge.cache import TagCache
from tagforge.chunking import ChunkingConfig
from tagforge.gateway import MockGateway, resolve_gateway
from tagforge.pipeline import ContextTagger
from tagforge.report import emit_report
from tagforge.taggers import TaggerConfig, TaggerKind, load_categories
from tagforge.taggers.gazetteer import load_lexicon

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cl", default="250,500,16000,32000")
    parser.add_argument("--needles", type=int, default=58)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--gateway", default="oracle", help="oracle | empty | http")
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    corpus = synthetic_corpus(n_docs=20, sentences_per_doc=40, seed=97)
    needles = synthetic_needles(n=args.needles, seed=11)
    categories = load_categories(FIXTURES / "categories_privileged.json")
    lexicon = load_lexicon(FIXTURES / "lexicon.json")
    cls = [int(c) for c in args.cl.split(",")]

    def oracle(req):
        for n in needles:
            if n.question in req.user:
                return f"The character is {n.gold_answers[0]}."
        return ""

    gateway = MockGateway(fn=oracle) if args.gateway == "oracle" \
        else resolve_gateway(args.gateway, oracle=oracle)

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="nolima-mock-"))
    workdir.mkdir(parents=True, exist_ok=True)
    tagger = ContextTagger(
        ChunkingConfig(max_chunk_size=250),
        TaggerConfig(kind=TaggerKind.GAZETTEER, categories=tuple(categories)),
        cache=TagCache(workdir / "tagcache"), lexicon=lexicon)
    tasks = nolima_tasks(needles, corpus, categories, context_lengths=cls,
                         modes=(PromptMode.BASELINE, PromptMode.TD, PromptMode.TD_TC),
                         seed=args.seed, tagger=tagger)
    print(f"{len(tasks)} instances -> {workdir}")
    records = run_eval(tasks, gateway, workdir / "records.jsonl")
    emit_report(records, workdir / "report", tagger="gazetteer")

    table = accuracy_table(records, "prompt_mode,context_length")
    for (mode, cl) in sorted(table):
        print(f"{mode:9s} CL{cl:<6d} {table[(mode, cl)]:6.2f}")
    print(f"tagger calls: {tagger.stats.tagger_calls}, cache hits: {tagger.stats.cache_hits}")
    print(f"report: {workdir / 'report.md'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
