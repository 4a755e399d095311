"""Render, verify, and strip nested XML-style semantic markup.

The tags are textual markers, not strict XML: document content is never
entity-escaped, because escaping would alter the context the model sees.
Fidelity is instead defined as an exact strip-inverse — removing every
``<Name>``/``</Name>`` token for the run's categories must reproduce the
original text byte-for-byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .core import (
    CATEGORY_NAME_RE,
    TagforgeError,
    TagSpan,
    is_char_boundary,
    utf8_offsets,
)


class InvalidCategoryName(TagforgeError):
    pass


class OverlapUnresolvable(TagforgeError):
    pass


class NestingOrder(str, Enum):
    LONGER_SPAN_OUTER = "longer_span_outer"
    CATEGORY_ALPHABETICAL = "category_alphabetical"


class CollisionPolicy(str, Enum):
    DROP_INNER = "drop_inner"
    TRUNCATE_INNER = "truncate_inner"


@dataclass(frozen=True)
class MarkupPolicy:
    """Deterministic ordering and collision rules, recorded in run provenance.

    Geometry already forces the nesting of unequal spans, so the two
    nesting orders differ only for equal-extent spans; both place the
    alphabetically first category outermost there.
    """

    nesting_order: NestingOrder = NestingOrder.LONGER_SPAN_OUTER
    chunk_label_order: tuple[str, ...] | None = None  # None = alphabetical
    collision_policy: CollisionPolicy = CollisionPolicy.DROP_INNER

    def describe(self) -> str:
        order = ",".join(self.chunk_label_order) if self.chunk_label_order else "alpha"
        return f"{self.nesting_order.value}/{order}/{self.collision_policy.value}"


@dataclass(frozen=True)
class FidelityReport:
    ok: bool
    first_divergence: int | None
    balanced: bool


def _check_name(name: str) -> str:
    if not CATEGORY_NAME_RE.match(name):
        raise InvalidCategoryName(f"category name {name!r} is not a valid element name")
    return name


def order_chunk_labels(labels: set[str] | frozenset[str], policy: MarkupPolicy) -> list[str]:
    """Outermost-first label order for chunk-level wrapping."""
    if policy.chunk_label_order:
        rank = {name: i for i, name in enumerate(policy.chunk_label_order)}
        return sorted(labels, key=lambda n: (rank.get(n, len(rank)), n))
    return sorted(labels)


def render_chunk_markup(text: str, labels: set[str] | frozenset[str],
                        policy: MarkupPolicy | None = None) -> str:
    """Wrap ``text`` in one open/close pair per label, innermost content
    byte-identical to the input. An empty label set returns the input."""
    if not labels:
        return text
    policy = policy or MarkupPolicy()
    ordered = [_check_name(n) for n in order_chunk_labels(labels, policy)]
    opens = "".join(f"<{n}>" for n in ordered)
    closes = "".join(f"</{n}>" for n in reversed(ordered))
    return opens + text + closes


def resolve_collisions(spans: list[TagSpan] | tuple[TagSpan, ...],
                       policy: MarkupPolicy | None = None) -> tuple[TagSpan, ...]:
    """Reduce arbitrary spans to a disjoint-or-nested set.

    Spans are processed in (start asc, end desc, category) order; a span
    partially overlapping an already-kept one is dropped (drop_inner) or
    truncated to the enclosing span's end (truncate_inner). Exact duplicates
    collapse. The later-starting span is always the one that yields.
    """
    policy = policy or MarkupPolicy()
    ordered = sorted(set(spans), key=lambda s: (s.start, -s.end, s.category))
    kept: list[TagSpan] = []
    open_stack: list[TagSpan] = []
    for span in ordered:
        while open_stack and open_stack[-1].end <= span.start:
            open_stack.pop()
        if open_stack and open_stack[-1].end < span.end:
            if policy.collision_policy is CollisionPolicy.DROP_INNER:
                continue
            span = TagSpan(span.category, span.start, open_stack[-1].end)
            if any(k == span for k in kept):
                continue
        kept.append(span)
        open_stack.append(span)
    # Defensive: the sweep above should always produce a valid nesting.
    stack: list[TagSpan] = []
    for span in kept:
        while stack and stack[-1].end <= span.start:
            stack.pop()
        if stack and stack[-1].end < span.end:
            raise OverlapUnresolvable(f"{policy.collision_policy.value} left {span} overlapping")
        stack.append(span)
    return tuple(kept)


def render_span_markup(text: str, spans: list[TagSpan] | tuple[TagSpan, ...],
                       policy: MarkupPolicy | None = None) -> str:
    """Insert open/close tags at span byte offsets.

    Containing spans' tags enclose contained spans' tags; equal-extent spans
    nest alphabetically-first outermost. Removing every inserted tag token
    yields the original text exactly.
    """
    policy = policy or MarkupPolicy()
    if not spans:
        return text
    data = text.encode("utf-8")
    for span in spans:
        _check_name(span.category)
        if span.end > len(data):
            raise ValueError(f"span {span} exceeds text length {len(data)}")
        if not is_char_boundary(data, span.start) or not is_char_boundary(data, span.end):
            raise ValueError(f"span {span} not on a character boundary")
    resolved = resolve_collisions(spans, policy)

    # One event per tag token. At equal positions closes precede opens;
    # closes unwind inner-first (later start, then reverse-alpha for equal
    # extents) and opens nest outer-first (longer span, then alpha).
    events: list[tuple[int, int, tuple, bytes]] = []
    for span in resolved:
        name = span.category.encode()
        events.append((span.end, 0, (-span.start, _rev_key(span.category)), b"</" + name + b">"))
        events.append((span.start, 1, (-span.end, span.category), b"<" + name + b">"))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    out = bytearray()
    pos = 0
    for position, _, _, token in events:
        out += data[pos:position]
        out += token
        pos = position
    out += data[pos:]
    return out.decode("utf-8")


def _rev_key(name: str) -> tuple[int, ...]:
    # Sort helper: reverse-alphabetical without relying on locale tricks.
    return tuple(-ord(c) for c in name)


def _token_re(categories: set[str] | frozenset[str]) -> re.Pattern[str] | None:
    names = sorted(n for n in categories if CATEGORY_NAME_RE.match(n))
    if not names:
        return None
    return re.compile("</?(?:" + "|".join(map(re.escape, names)) + ")>")


def strip_tags(marked: str, categories: set[str] | frozenset[str]) -> str:
    """Remove exactly the tokens ``<name>``/``</name>`` for known categories.

    All other text is preserved, including literal angle brackets that do
    not form a known tag token. Unbalanced tags are removed token-wise.
    """
    pattern = _token_re(categories)
    if pattern is None:
        return marked
    return pattern.sub("", marked)


def tags_balanced(marked: str, categories: set[str] | frozenset[str]) -> bool:
    """Stack-check that known tag tokens are balanced and properly nested."""
    pattern = _token_re(categories)
    if pattern is None:
        return True
    stack: list[str] = []
    for m in pattern.finditer(marked):
        token = m.group(0)
        if token.startswith("</"):
            name = token[2:-1]
            if not stack or stack[-1] != name:
                return False
            stack.pop()
        else:
            stack.append(token[1:-1])
    return not stack


def verify_fidelity(original: str, marked: str,
                    categories: set[str] | frozenset[str]) -> FidelityReport:
    """Check that ``marked`` is exactly ``original`` plus balanced tag tokens."""
    stripped = strip_tags(marked, categories)
    balanced = tags_balanced(marked, categories)
    if stripped == original:
        return FidelityReport(ok=balanced, first_divergence=None, balanced=balanced)
    a = original.encode("utf-8")
    b = stripped.encode("utf-8")
    limit = min(len(a), len(b))
    divergence = limit
    for i in range(limit):
        if a[i] != b[i]:
            divergence = i
            break
    return FidelityReport(ok=False, first_divergence=divergence, balanced=balanced)


def extract_spans(original: str, marked: str,
                  categories: set[str] | frozenset[str]) -> tuple[TagSpan, ...]:
    """Lift inline tags out of ``marked`` as byte-offset spans over ``original``.

    Callers must have verified fidelity first; offsets are computed by
    walking the tag tokens and accumulating the untagged text between them.
    """
    pattern = _token_re(categories)
    if pattern is None:
        return ()
    offsets = utf8_offsets(original)
    spans: list[TagSpan] = []
    stack: list[tuple[str, int]] = []
    char_pos = 0
    last = 0
    for m in pattern.finditer(marked):
        char_pos += m.start() - last
        last = m.end()
        token = m.group(0)
        if token.startswith("</"):
            name = token[2:-1]
            if stack and stack[-1][0] == name:
                _, start_char = stack.pop()
                if start_char < char_pos:
                    spans.append(TagSpan(name, offsets[start_char], offsets[char_pos]))
        else:
            stack.append((token[1:-1], char_pos))
    return tuple(sorted(spans, key=lambda s: (s.start, -s.end, s.category)))


def render_tagged_text(text: str, labels: set[str] | frozenset[str],
                       spans: tuple[TagSpan, ...] | list[TagSpan],
                       policy: MarkupPolicy | None = None) -> str:
    """Entity spans rendered inside, chunk-level labels wrapped outside."""
    return render_chunk_markup(render_span_markup(text, spans, policy), labels, policy)
