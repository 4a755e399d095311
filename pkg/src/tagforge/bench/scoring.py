"""Scoring and metric arithmetic for the evaluation harness.

Accuracy is the contains-match rule for haystack QA and exact letter match
for MCQ; tables report 100 * mean(score) per group with half-up rounding to
two decimals. The extremum drop rate is the relative decline from the
shortest to the longest context length.
"""

from __future__ import annotations

import re
from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Mapping, Sequence

from ..core import TagforgeError


class ZeroShortAccuracy(TagforgeError):
    pass


def _normalize_ws(text: str) -> str:
    return " ".join(text.split()).lower()


def score_contains(response: str, gold_answers: Sequence[str]) -> int:
    """1 iff any gold answer occurs as a case-insensitive substring of the
    whitespace-normalized response."""
    haystack = _normalize_ws(response)
    return int(any(_normalize_ws(g) in haystack for g in gold_answers if g))


_LETTER = re.compile(r"(?<![A-Za-z])([ABCD])(?![A-Za-z])")


def extract_mcq_letter(response: str) -> str | None:
    """First standalone A/B/C/D in the response, tolerating wrappers like
    "Answer: B"; None when no letter can be extracted."""
    m = _LETTER.search(response)
    return m.group(1) if m else None


def score_mcq(response: str, gold: str) -> int:
    return int(extract_mcq_letter(response) == gold.strip().upper())


def round2(value: Decimal) -> float:
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def percent(correct: int, total: int) -> float:
    if total == 0:
        raise ZeroDivisionError("empty group")
    return round2(Decimal(100 * correct) / Decimal(total))


def accuracy_table(records: Iterable, group_by: str | Callable) -> dict:
    """100 * mean(score) per group, 2 decimals, half-up.

    ``group_by`` is an attribute name (or dotted pair "a,b") or a callable.
    Records whose score is absent (errored instances) are excluded; empty
    groups are simply absent from the result, never reported as zero.
    """
    if callable(group_by):
        key = group_by
    else:
        names = [n.strip() for n in str(group_by).split(",")]
        if len(names) == 1:
            key = lambda r: getattr(r, names[0])  # noqa: E731
        else:
            key = lambda r: tuple(getattr(r, n) for n in names)  # noqa: E731
    totals: dict = defaultdict(lambda: [0, 0])
    for rec in records:
        score = getattr(rec, "score", None)
        if score is None:
            continue
        bucket = totals[key(rec)]
        bucket[0] += score
        bucket[1] += 1
    return {group: percent(correct, count) for group, (correct, count) in totals.items()}


def extremum_drop_rate(per_cl: Mapping[int, float]) -> float:
    """100 * (acc[shortest CL] - acc[longest CL]) / acc[shortest CL]."""
    if len(per_cl) < 2:
        raise ValueError("need at least two context lengths")
    short, long_ = min(per_cl), max(per_cl)
    acc_short = Decimal(str(per_cl[short]))
    acc_long = Decimal(str(per_cl[long_]))
    if acc_short == 0:
        raise ZeroShortAccuracy(f"accuracy at CL {short} is zero")
    return round2(Decimal(100) * (acc_short - acc_long) / acc_short)
