#!/usr/bin/env python3
"""Regenerate the committed test fixtures.

Everything here is seeded and deterministic, so re-running the script must
reproduce the committed files byte-for-byte. The bridge dialogue fixture is
computed with a plain string-search oracle; the bridge's own test suite
checks that a live bridge process reproduces it exactly.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tagforge.chunking import ChunkingConfig, chunk
from tagforge.core import Document, utf8_offsets, write_documents_jsonl
from tagforge.gateway import CompletionRequest, MockGateway, RecordReplayGateway, ReplayMode
from tagforge.markup import render_span_markup
from tagforge.taggers import TaggerConfig, TaggerKind, builtin_categories
from tagforge.taggers.gazetteer import Lexicon, tag_gazetteer
from tagforge.taggers.llm import tag_llm_classification
from tagforge.bench.synth import _OBJECTS, _PLACES, synthetic_corpus, synthetic_needles

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def write_corpus() -> list[Document]:
    docs = synthetic_corpus(n_docs=20, sentences_per_doc=40, seed=97)
    write_documents_jsonl(FIXTURES / "corpus.jsonl", docs)
    return docs


def write_needles() -> list:
    needles = synthetic_needles(n=58, seed=11)
    with open(FIXTURES / "needles.jsonl", "w", encoding="utf-8") as fh:
        for n in needles:
            fh.write(json.dumps({"id": n.id, "needle_text": n.needle_text,
                                 "question": n.question,
                                 "gold_answers": list(n.gold_answers),
                                 "keywords": list(n.keywords)},
                                ensure_ascii=False) + "\n")
    return needles


def write_lexicon(needles) -> dict:
    names = sorted({n.gold_answers[0] for n in needles})
    lexicon = {"Person": names, "FAC": sorted(_PLACES), "PRODUCT": sorted(_OBJECTS)}
    (FIXTURES / "lexicon.json").write_text(
        json.dumps(lexicon, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    return lexicon


def write_privileged_categories() -> None:
    categories = [
        {"name": "Person", "definition": "A named character.",
         "examples": ["Velora", "Brandik"]},
        {"name": "FAC", "definition": "A named building or facility.",
         "examples": ["Semper Opera House", "Harbor Lighthouse"]},
        {"name": "PRODUCT", "definition": "A named object someone can own.",
         "examples": ["bronze sextant", "brass telescope"]},
    ]
    (FIXTURES / "categories_privileged.json").write_text(
        json.dumps(categories, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def write_ie_corruption(docs, lexicon) -> None:
    """Corrupted IE outputs: altered text, invented tags, unbalanced tags,
    truncated echoes. Every case must be downgraded by the fidelity gate."""
    lex = Lexicon(entries={k: tuple(v) for k, v in lexicon.items()})
    rng = random.Random(4242)
    needles = synthetic_needles(n=58, seed=11)
    texts = [n.needle_text for n in needles[:12]]
    cfg = ChunkingConfig(max_chunk_size=60)
    for doc in docs[:3]:
        texts.extend(c.text for c in chunk(doc, cfg)[:3])
    cases = []
    for i, text in enumerate(texts):
        c = type("C", (), {"text": text})  # tag_gazetteer only reads .text
        spans = tag_gazetteer(c, lex)
        marked = render_span_markup(text, spans)
        kind = ("altered_text", "invented_tag", "unbalanced", "truncated")[i % 4]
        if kind == "altered_text":
            pos = rng.randrange(len(text))
            corrupt = marked.replace(text[pos], "Q", 1) if text[pos] != "Q" \
                else marked.replace(text[pos], "Z", 1)
        elif kind == "invented_tag":
            corrupt = f"<Hero>{marked}</Hero>"
        elif kind == "unbalanced":
            corrupt = "<Person>" + marked
        else:
            corrupt = marked[: max(4, len(marked) // 2)]
        cases.append({"original": text, "marked": corrupt, "kind": kind})
    (FIXTURES / "ie_corruption.json").write_text(
        json.dumps(cases, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def write_bridge_dialogue(lexicon) -> None:
    """Bridge exchanges computed with a string-search oracle over fixture
    sentences, including non-ASCII surfaces, with UTF-8 byte offsets."""
    raw_label = {"Person": "PERSON", "FAC": "FAC", "PRODUCT": "PRODUCT"}
    texts = [
        "Marie Curie won a Nobel Prize.",
        "Velora keeps a bronze sextant next to the Semper Opera House.",
        "the the the",
        "José rode the tram to the Glass Foundry with Müller.",
        "Åse admired the Stone Amphitheatre at dusk.",
        "Nothing notable happens in this sentence.",
    ]
    surfaces = {
        "PERSON": sorted(set(lexicon["Person"]) | {"Marie Curie", "José", "Müller", "Åse"}),
        "FAC": lexicon["FAC"],
        "PRODUCT": lexicon["PRODUCT"],
    }
    exchanges = []
    for i, text in enumerate(texts):
        offsets = utf8_offsets(text)
        entities = []
        for label in ("PERSON", "FAC", "PRODUCT"):
            for phrase in surfaces[label]:
                start = text.find(phrase)
                while start != -1:
                    entities.append({"label": label,
                                     "start": offsets[start],
                                     "end": offsets[start + len(phrase)]})
                    start = text.find(phrase, start + 1)
        entities.sort(key=lambda e: (e["start"], -e["end"], e["label"]))
        exchanges.append({
            "request": {"id": f"fx-{i}", "text": text, "categories": []},
            "response": {"id": f"fx-{i}", "entities": entities},
        })
    fixture = {
        "handshake": {"protocol": "tagforge-bridge", "version": 1,
                      "model": "rules", "labels": sorted(surfaces)},
        "exchanges": exchanges,
    }
    (FIXTURES / "bridge_dialogue.json").write_text(
        json.dumps(fixture, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    # The bridge's rule engine loads this lexicon to reproduce the dialogue.
    (FIXTURES / "bridge_lexicon.json").write_text(
        json.dumps(surfaces, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def write_llm_replay(docs, lexicon) -> None:
    """Record 50 classification exchanges through the replay store and
    freeze the expected labels; tests replay with zero network access."""
    replay_dir = FIXTURES / "llm_replay"
    replay_dir.mkdir(exist_ok=True)
    for stale in replay_dir.glob("*.json"):
        stale.unlink()
    categories = [c for c in builtin_categories() if c.name in ("Person", "FAC", "PRODUCT")]
    lex = Lexicon(entries={k: tuple(v) for k, v in lexicon.items()})
    needles = synthetic_needles(n=58, seed=11)
    chunks = []
    cfg = ChunkingConfig(max_chunk_size=40)
    for doc in docs[:6]:
        chunks.extend(chunk(doc, cfg))
    pool = [c for c in chunks][:38]
    for n in needles[:12]:
        fake = Document(id=f"fx-{n.id}", text=n.needle_text)
        pool.extend(chunk(fake, cfg))
    pool = pool[:50]

    def answer(req: CompletionRequest) -> str:
        # Stand-in model: labels every chunk by its gazetteer hits.
        body = req.user.rsplit("Text:\n", 1)[1]
        holder = type("C", (), {"text": body})
        labels = sorted({s.category for s in tag_gazetteer(holder, lex)})
        return json.dumps(labels)

    recorder = RecordReplayGateway(root=replay_dir, mode=ReplayMode.RECORD,
                                   inner=MockGateway(fn=answer))
    tagger_cfg = TaggerConfig(kind=TaggerKind.LLM_CLASSIFICATION,
                              categories=tuple(categories))
    expected = {}
    for c in pool:
        tc = tag_llm_classification(c, tagger_cfg, recorder)
        expected[c.hash] = sorted(tc.chunk_labels)
    chunk_records = [{"doc_id": c.doc_id, "index": c.index, "start": c.start,
                      "end": c.end, "text": c.text, "hash": c.hash} for c in pool]
    (FIXTURES / "llm_replay_chunks.json").write_text(
        json.dumps(chunk_records, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    (FIXTURES / "llm_replay_expected.json").write_text(
        json.dumps(expected, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_report_golden() -> None:
    """Golden report for the oracle-mock CLI pipeline over the fixtures.

    Regenerated here (not in the test) so an intentional report-format
    change is an explicit fixture update.
    """
    import tempfile

    from tagforge.cli import main as cli_main

    with tempfile.TemporaryDirectory() as tmp:
        results = Path(tmp) / "results.jsonl"
        code = cli_main([
            "bench", "nolima",
            "--needles", str(FIXTURES / "needles.jsonl"),
            "--corpus", str(FIXTURES / "corpus.jsonl"),
            "--categories", str(FIXTURES / "categories_privileged.json"),
            "--lexicon", str(FIXTURES / "lexicon.json"),
            "--cl", "250,500", "--mode", "baseline,td,td_tc",
            "--tagger", "gazetteer", "--gateway", "oracle", "--seed", "3",
            "--out", str(results)])
        assert code == 0, "golden pipeline run failed"
        report = Path(tmp) / "report"
        code = cli_main(["report", "--in", str(results), "--format", "md,csv",
                         "--tagger-name", "gazetteer", "--out", str(report)])
        assert code == 0
        (FIXTURES / "report_golden.md").write_text(
            report.with_suffix(".md").read_text(encoding="utf-8"), encoding="utf-8")
        (FIXTURES / "report_golden.csv").write_text(
            report.with_suffix(".csv").read_text(encoding="utf-8"), encoding="utf-8")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    docs = write_corpus()
    needles = write_needles()
    lexicon = write_lexicon(needles)
    write_privileged_categories()
    write_ie_corruption(docs, lexicon)
    write_bridge_dialogue(lexicon)
    write_llm_replay(docs, lexicon)
    write_report_golden()
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
