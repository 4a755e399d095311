"""Summary tables over evaluation records: Markdown and CSV, deterministic,
free of absolute paths, with delta-vs-baseline columns and the extremum
drop-rate column for context-length runs."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .bench.runner import EvalRecord
from .bench.scoring import accuracy_table, extremum_drop_rate, round2
from decimal import Decimal

_MODE_ORDER = {"baseline": 0, "td": 1, "td_tc": 2}
_MODE_TRAITS = {
    # mode -> (tagged context?, tag definitions in prompt?)
    "baseline": ("No", "No"),
    "td": ("No", "Yes"),
    "td_tc": ("Yes", "Yes"),
}
_COMPLEXITY_ORDER = ("single_hop", "multi_hop", "detail")
_COMPLEXITY_LABELS = {"single_hop": "Single-hop", "multi_hop": "Multi-hop",
                      "detail": "Detail"}


def format_cl(cl: int) -> str:
    return f"{cl / 1000:g}K" if cl >= 1000 else str(cl)


def _modes(records: Sequence[EvalRecord]) -> list[str]:
    present = {r.prompt_mode for r in records}
    return sorted(present, key=lambda m: (_MODE_ORDER.get(m, 99), m))


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _delta(value: float | None, base: float | None) -> str:
    if value is None or base is None:
        return ""
    d = round2(Decimal(str(value)) - Decimal(str(base)))
    return f"{d:+.2f}"


def build_table(records: Sequence[EvalRecord], tagger: str = "-") -> tuple[list[str], list[list[str]]]:
    """Header and rows in the published table shape.

    Context-length records produce the NIAH table (accuracy per CL plus the
    extremum drop rate); complexity records produce the MCQ table. Delta
    columns appear only when a baseline mode is present alongside others.
    """
    by_cl = any(r.context_length is not None for r in records)
    modes = _modes(records)
    with_delta = "baseline" in modes and len(modes) > 1

    if by_cl:
        cls = sorted({r.context_length for r in records if r.context_length is not None})
        groups = [("context_length", cl, format_cl(cl)) for cl in cls]
    else:
        present = {r.complexity for r in records}
        ordered = [c for c in _COMPLEXITY_ORDER if c in present]
        ordered += sorted(present - set(_COMPLEXITY_ORDER) - {None})
        groups = [("complexity", c, _COMPLEXITY_LABELS.get(c, c)) for c in ordered]

    header = ["Mode", "Tagged Context", "Tagger", "Tag definitions in prompt"]
    for _, _, label in groups:
        header.append(label)
        if with_delta:
            header.append(f"d{label} vs baseline")
    if by_cl:
        header.append("Extremum drop rate")

    acc = accuracy_table(records, "prompt_mode,context_length" if by_cl
                         else "prompt_mode,complexity")
    baseline_row = {key: v for (m, key), v in acc.items() if m == "baseline"}

    rows = []
    for mode in modes:
        tagged_ctx, td = _MODE_TRAITS.get(mode, ("?", "?"))
        row = [mode, tagged_ctx, tagger if mode == "td_tc" else "-", td]
        per_group: dict = {}
        for _, key, _label in groups:
            value = acc.get((mode, key))
            per_group[key] = value
            row.append(_fmt(value))
            if with_delta:
                row.append("" if mode == "baseline"
                           else _delta(value, baseline_row.get(key)))
        if by_cl:
            known = {k: v for k, v in per_group.items() if v is not None}
            if len(known) >= 2 and known[min(known)] != 0:
                row.append(_fmt(extremum_drop_rate(known)))
            else:
                row.append("")
        rows.append(row)
    return header, rows


def to_markdown(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def to_csv(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit_report(records: Sequence[EvalRecord], out_base: str | Path,
                formats: Sequence[str] = ("md", "csv"),
                tagger: str = "-") -> dict[str, Path]:
    """Write ``<out_base>.md`` / ``<out_base>.csv``; returns written paths."""
    if not records:
        raise ValueError("no records to report")
    header, rows = build_table(records, tagger=tagger)
    out_base = Path(out_base)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if "md" in formats:
        path = out_base.with_suffix(".md")
        path.write_text(to_markdown(header, rows), encoding="utf-8")
        written["md"] = path
    if "csv" in formats:
        path = out_base.with_suffix(".csv")
        path.write_text(to_csv(header, rows), encoding="utf-8")
        written["csv"] = path
    return written
