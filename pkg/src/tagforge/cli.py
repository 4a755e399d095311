"""tagforge command line: chunk, tag, render, bench, report, cache.

Exit codes: 0 success, 1 operational error, 2 usage error. All randomness
is driven by --seed; gateway credentials come only from the environment.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .cache import TagCache
from .chunking import ChunkingConfig, Strategy, chunk as chunk_document
from .core import Chunk, TagforgeError, TaggedChunk, digest_of, read_documents_jsonl
from .gateway import CompletionRequest, resolve_gateway
from .manifest import RunManifest
from .markup import MarkupPolicy, render_tagged_text
from .pipeline import ContextTagger, tag_chunks
from .report import emit_report
from .taggers import (
    SubprocessBridge,
    TaggerConfig,
    TaggerKind,
    builtin_categories,
    load_categories,
    load_label_map,
    load_lexicon,
)
from .tokens import EstimatorMode, TokenEstimator


def _parser() -> argparse.ArgumentParser:
    # Subparsers parse into a fresh namespace on this Python, so shared flags
    # live on a parent parser attached to every subcommand.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override flag defaults")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(
        prog="tagforge",
        description="Semantic tagging and long-context QA benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chunk", help="segment a corpus into chunks", parents=[common])
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="sentence")
    p.add_argument("--max-chunk-size", type=int, default=250)
    p.add_argument("--overlap", type=int, default=0)
    p.add_argument("--estimator", choices=[m.value for m in EstimatorMode],
                   default="chars_div_4")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("tag", help="tag chunks and cache the results", parents=[common])
    p.add_argument("--tagger", choices=[k.value for k in TaggerKind], required=True)
    p.add_argument("--categories", help="category-set JSON (default: builtin ner18)")
    p.add_argument("--lexicon", help="gazetteer lexicon JSON")
    p.add_argument("--label-map", help="NER label -> category JSON")
    p.add_argument("--bridge-cmd", help="external bridge launch command")
    p.add_argument("--cache", help="tag cache directory")
    p.add_argument("--gateway", default="http",
                   help="http | replay:<dir> | record:<dir> | empty")
    p.add_argument("--max-workers", type=int, default=1)
    p.add_argument("--render", action="store_true",
                   help="include rendered tagged_text per record")
    p.add_argument("--dedup-scope", choices=("run", "per-doc"), default="run",
                   help="share tagging across the whole input or per document")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("render", help="render tagged chunks to marked-up text", parents=[common])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("bench", help="run a benchmark suite")
    bench_sub = p.add_subparsers(dest="suite", required=True)

    pn = bench_sub.add_parser("nolima", help="needle-in-a-haystack QA", parents=[common])
    pn.add_argument("--needles", required=True)
    pn.add_argument("--corpus", required=True)
    pn.add_argument("--categories")
    pn.add_argument("--cl", default="250,500,16000,32000")
    pn.add_argument("--positions", type=int, default=26)
    pn.add_argument("--mode", default="baseline")
    pn.add_argument("--tagger", choices=[k.value for k in TaggerKind],
                    default="gazetteer")
    pn.add_argument("--lexicon")
    pn.add_argument("--cache")
    pn.add_argument("--gateway", default="http",
                    help="http | oracle | empty | replay:<dir> | record:<dir>")
    pn.add_argument("--max-chunk-size", type=int, default=250)
    pn.add_argument("--no-resume", action="store_true")
    pn.add_argument("--out", dest="outfile", required=True)

    pq = bench_sub.add_parser("novelqa", help="multiple-choice book QA", parents=[common])
    pq.add_argument("--books", required=True, help="corpus JSONL of book documents")
    pq.add_argument("--mcq", required=True, help="MCQ instances JSONL")
    pq.add_argument("--categories")
    pq.add_argument("--budget", type=int, default=180000)
    pq.add_argument("--mode", default="baseline")
    pq.add_argument("--tagger", choices=[k.value for k in TaggerKind],
                    default="gazetteer")
    pq.add_argument("--lexicon")
    pq.add_argument("--cache")
    pq.add_argument("--gateway", default="http")
    pq.add_argument("--max-chunk-size", type=int, default=250)
    pq.add_argument("--no-resume", action="store_true")
    pq.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("report", help="summary tables from results JSONL", parents=[common])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", default="md,csv")
    p.add_argument("--tagger-name", default="-")
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("cache", help="cache maintenance")
    cache_sub = p.add_subparsers(dest="cache_command", required=True)
    pc = cache_sub.add_parser("stats", parents=[common])
    pc.add_argument("--cache", required=True)
    pc = cache_sub.add_parser("gc", parents=[common])
    pc.add_argument("--cache", required=True)
    pc.add_argument("--max-bytes", type=int, required=True)
    return parser


def _apply_defaults(parser: argparse.ArgumentParser, config: dict) -> None:
    parser.set_defaults(**config)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                _apply_defaults(sub, config)


def _load_config_defaults(argv: list[str], parser: argparse.ArgumentParser) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    with open(path, encoding="utf-8") as fh:
        _apply_defaults(parser, json.load(fh))


def _categories(path: str | None):
    return load_categories(path) if path else builtin_categories()


def _read_chunks(path: str) -> list[Chunk]:
    return [Chunk(doc_id=r["doc_id"], index=r["index"], start=r["start"],
                  end=r["end"], text=r["text"], hash=r.get("hash", ""))
            for r in _read_jsonl(path)]


def _read_jsonl(path: str):
    from .core import read_jsonl

    return list(read_jsonl(path))


def _cmd_chunk(args: argparse.Namespace) -> int:
    docs = read_documents_jsonl(args.infile)
    cfg = ChunkingConfig(strategy=Strategy(args.strategy),
                         max_chunk_size=args.max_chunk_size, overlap=args.overlap)
    est = TokenEstimator(mode=EstimatorMode(args.estimator))
    manifest = RunManifest(config={"command": "chunk", "strategy": args.strategy,
                                   "max_chunk_size": args.max_chunk_size,
                                   "overlap": args.overlap, "seed": args.seed})
    n_chunks = 0
    with open(args.outfile, "w", encoding="utf-8") as out:
        for doc in docs:
            for c in chunk_document(doc, cfg, est):
                out.write(json.dumps({"doc_id": c.doc_id, "index": c.index,
                                      "start": c.start, "end": c.end,
                                      "text": c.text, "hash": c.hash},
                                     ensure_ascii=False) + "\n")
                n_chunks += 1
                if est.estimate(c.text) > cfg.max_chunk_size:
                    manifest.counts["oversized_chunks"] += 1
    manifest.counts["documents"] = len(docs)
    manifest.counts["chunks"] = n_chunks
    manifest.write(Path(args.outfile).with_suffix(".manifest.json"))
    print(f"wrote {n_chunks} chunks from {len(docs)} documents to {args.outfile}")
    return 0


def _tagger_config(args: argparse.Namespace, categories) -> TaggerConfig:
    params: dict = {}
    if getattr(args, "lexicon", None):
        params["lexicon_path"] = args.lexicon
    if getattr(args, "bridge_cmd", None):
        params["bridge_cmd"] = args.bridge_cmd
    return TaggerConfig(kind=TaggerKind(args.tagger), categories=tuple(categories),
                        params=params)


def _cmd_tag(args: argparse.Namespace) -> int:
    categories = _categories(args.categories)
    cfg = _tagger_config(args, categories)
    chunks = _read_chunks(args.infile)
    cache = TagCache(args.cache) if args.cache else None
    gateway = None
    bridge = None
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    label_map = load_label_map(args.label_map) if args.label_map else None
    if cfg.kind in (TaggerKind.LLM_CLASSIFICATION, TaggerKind.LLM_IE, TaggerKind.HYBRID):
        gateway = resolve_gateway(args.gateway)
    if cfg.kind is TaggerKind.EXTERNAL:
        if not args.bridge_cmd:
            raise TagforgeError("--bridge-cmd is required for the external tagger")
        bridge = SubprocessBridge(args.bridge_cmd.split())

    from .taggers import TagStats

    stats = TagStats()
    tagged: dict[str, TaggedChunk] = {}
    unique_count = 0
    if args.dedup_scope == "per-doc":
        # Tagging reuse stays within each document (the cache still shares).
        groups: dict[str, list[Chunk]] = {}
        for c in chunks:
            groups.setdefault(c.doc_id, []).append(c)
        batches = list(groups.values())
    else:
        batches = [chunks]
    for batch in batches:
        part = tag_chunks(batch, cfg, cache=cache, gateway=gateway, lexicon=lexicon,
                          bridge=bridge, label_map=label_map,
                          max_workers=args.max_workers, stats=stats)
        tagged.update(part.tagged)
        unique_count += len(part.unique)
    if bridge is not None:
        bridge.close()

    policy = MarkupPolicy()
    with open(args.outfile, "w", encoding="utf-8") as out:
        for c in chunks:
            tc = tagged[c.hash]
            rec = tc.to_dict()
            rec["chunk"] = {**rec["chunk"], "doc_id": c.doc_id, "index": c.index,
                            "start": c.start, "end": c.end}
            if args.render:
                rec["tagged_text"] = render_tagged_text(
                    c.text, tc.chunk_labels,
                    tc.spans if c.text == tc.chunk.text else (), policy)
            out.write(json.dumps(rec, ensure_ascii=False) + "\n")
    manifest = RunManifest(config={"command": "tag", "tagger": cfg.to_dict(),
                                   "dedup_scope": args.dedup_scope,
                                   "seed": args.seed},
                           category_set_hash=digest_of([c.name for c in categories]),
                           cache_stats=vars(cache.stats()) if cache else {})
    manifest.counts.update(stats.as_dict())
    manifest.counts["chunks"] = len(chunks)
    manifest.counts["unique_chunks"] = unique_count
    manifest.write(Path(args.outfile).with_suffix(".manifest.json"))
    print(f"tagged {unique_count} unique chunks "
          f"({stats.tagger_calls} tagger calls, {stats.cache_hits} cache hits)")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    policy = MarkupPolicy()
    n = 0
    with open(args.outfile, "w", encoding="utf-8") as out:
        for rec in _read_jsonl(args.infile):
            tc = TaggedChunk.from_dict(rec)
            rec["tagged_text"] = render_tagged_text(tc.chunk.text, tc.chunk_labels,
                                                    tc.spans, policy)
            out.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    print(f"rendered {n} tagged chunks to {args.outfile}")
    return 0


def _context_tagger(args: argparse.Namespace, categories, gateway) -> ContextTagger:
    chunk_cfg = ChunkingConfig(max_chunk_size=args.max_chunk_size)
    cfg = _tagger_config(args, categories)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    cache = TagCache(args.cache) if args.cache else None
    chunk_level = cfg.kind in (TaggerKind.LLM_CLASSIFICATION, TaggerKind.HYBRID)
    return ContextTagger(chunk_cfg, cfg, cache=cache, gateway=gateway,
                         lexicon=lexicon, chunk_level_only=chunk_level)


def _cmd_bench_nolima(args: argparse.Namespace) -> int:
    needles = [bench.NeedleSpec(id=r["id"], needle_text=r["needle_text"],
                                question=r["question"],
                                gold_answers=tuple(r["gold_answers"]),
                                keywords=tuple(r.get("keywords", ())))
               for r in _read_jsonl(args.needles)]
    corpus = read_documents_jsonl(args.corpus)
    categories = _categories(args.categories)
    modes = [bench.PromptMode(m.strip()) for m in args.mode.split(",")]
    cls = [int(c.strip()) for c in args.cl.split(",")]

    def oracle(req: CompletionRequest) -> str:
        for needle in needles:
            if needle.question in req.user:
                return f"The character is {needle.gold_answers[0]}."
        return ""

    gateway = resolve_gateway(args.gateway, oracle=oracle)
    tagger = None
    if bench.PromptMode.TD_TC in modes:
        tag_gateway = gateway if args.tagger not in ("gazetteer", "external") else None
        tagger = _context_tagger(args, categories, tag_gateway)
    tasks = bench.nolima_tasks(needles, corpus, categories, context_lengths=cls,
                               modes=modes, positions=args.positions,
                               seed=args.seed, tagger=tagger)
    records = bench.run_eval(tasks, gateway, out_path=args.outfile,
                             resume=not args.no_resume)
    manifest = RunManifest(config={"command": "bench nolima", "cl": cls,
                                   "modes": [m.value for m in modes],
                                   "positions": args.positions, "seed": args.seed,
                                   "tagger": args.tagger},
                           category_set_hash=digest_of([c.name for c in categories]))
    if tagger is not None:
        manifest.counts.update(tagger.stats.as_dict())
        manifest.counts["chunks"] = tagger.chunk_count
        manifest.counts["unique_chunks"] = tagger.unique_count
    manifest.counts["documents"] = len(corpus)
    manifest.write(Path(args.outfile).with_suffix(".manifest.json"))
    acc = bench.accuracy_table(records, "prompt_mode")
    for mode in sorted(acc):
        print(f"{mode}: {acc[mode]:.2f}")
    return 0


def _cmd_bench_novelqa(args: argparse.Namespace) -> int:
    books = read_documents_jsonl(args.books)
    instances = [bench.MCQInstance(book_id=r["book_id"], question=r["question"],
                                   options=dict(r["options"]), gold=r["gold"],
                                   complexity=bench.Complexity(r["complexity"]),
                                   evidence_offset=int(r.get("evidence_offset", 0)))
                 for r in _read_jsonl(args.mcq)]
    categories = _categories(args.categories)
    modes = [bench.PromptMode(m.strip()) for m in args.mode.split(",")]

    def oracle(req: CompletionRequest) -> str:
        for inst in instances:
            if inst.question in req.user:
                return inst.gold
        return ""

    gateway = resolve_gateway(args.gateway, oracle=oracle)
    tagger = None
    if bench.PromptMode.TD_TC in modes:
        tag_gateway = gateway if args.tagger not in ("gazetteer", "external") else None
        tagger = _context_tagger(args, categories, tag_gateway)
    tasks: list[bench.EvalTask] = []
    for book in books:
        book_instances = [i for i in instances if i.book_id == book.id]
        if not book_instances:
            continue
        tasks.extend(bench.novelqa_tasks(book, book_instances, categories,
                                         modes=modes, budget=args.budget,
                                         tagger=tagger))
    records = bench.run_eval(tasks, gateway, out_path=args.outfile,
                             resume=not args.no_resume)
    manifest = RunManifest(config={"command": "bench novelqa", "budget": args.budget,
                                   "modes": [m.value for m in modes],
                                   "seed": args.seed, "tagger": args.tagger},
                           category_set_hash=digest_of([c.name for c in categories]))
    manifest.counts["documents"] = len(books)
    manifest.write(Path(args.outfile).with_suffix(".manifest.json"))
    acc = bench.accuracy_table(records, "prompt_mode")
    for mode in sorted(acc):
        print(f"{mode}: {acc[mode]:.2f}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    records = bench.read_records(args.infile)
    if not records:
        raise TagforgeError(f"no records found in {args.infile}")
    formats = [f.strip() for f in args.format.split(",")]
    written = emit_report(records, args.outfile, formats=formats,
                          tagger=args.tagger_name)
    for fmt, path in sorted(written.items()):
        print(f"{fmt}: {path}")
    return 0


def _cmd_cache(args: argparse.Namespace) -> int:
    cache = TagCache(args.cache)
    if args.cache_command == "stats":
        stats = cache.stats()
        print(json.dumps({"entries": stats.entries, "bytes": stats.bytes}))
        return 0
    removed = cache.gc(args.max_bytes)
    print(f"removed {removed} entries")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        _load_config_defaults(argv, parser)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "chunk":
            return _cmd_chunk(args)
        if args.command == "tag":
            return _cmd_tag(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "bench":
            if args.suite == "nolima":
                return _cmd_bench_nolima(args)
            return _cmd_bench_novelqa(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "cache":
            return _cmd_cache(args)
        parser.error(f"unknown command {args.command!r}")
        return 2
    except (TagforgeError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
