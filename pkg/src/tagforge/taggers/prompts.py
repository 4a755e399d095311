"""Prompt templates for the LLM taggers and output parsing.

Templates are plain text files with {persona}, {instructions}, {format},
{categories}, {chunk} and optional {fewshot} slots; the shipped defaults
live under tagforge/templates/ and are meant to be edited.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from ..core import TagCategory, TagforgeError

REQUIRED_SLOTS = ("persona", "instructions", "format", "categories", "chunk")
_SLOT = re.compile(r"\{(persona|instructions|format|categories|chunk|fewshot)\}")


class TemplateSlotMissing(TagforgeError):
    pass


class UnparseableOutput(TagforgeError):
    pass


class FewShot(NamedTuple):
    text: str
    labels: tuple[str, ...]


class ParsedLabels(NamedTuple):
    labels: frozenset[str]
    rejected: tuple[str, ...]


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str

    def __post_init__(self) -> None:
        present = {m.group(1) for m in _SLOT.finditer(self.text)}
        missing = [s for s in REQUIRED_SLOTS if s not in present]
        if missing:
            raise TemplateSlotMissing(f"template {self.id!r} lacks slots: {missing}")

    def render(self, **slots: str) -> str:
        def sub(m: re.Match[str]) -> str:
            name = m.group(1)
            if name == "fewshot":
                return slots.get("fewshot", "")
            if name not in slots:
                raise TemplateSlotMissing(f"no value for slot {name!r}")
            return slots[name]

        return _SLOT.sub(sub, self.text)

    @classmethod
    def load(cls, path: str | Path) -> "PromptTemplate":
        path = Path(path)
        return cls(id=path.stem, text=path.read_text(encoding="utf-8"))

    @classmethod
    def builtin(cls, template_id: str) -> "PromptTemplate":
        data = resources.files("tagforge").joinpath(f"templates/{template_id}.txt")
        return cls(id=template_id, text=data.read_text(encoding="utf-8"))


def render_categories_block(categories: Iterable[TagCategory]) -> str:
    lines = []
    for cat in categories:
        line = f"- {cat.name}: {cat.definition}" if cat.definition else f"- {cat.name}"
        if cat.examples:
            line += " Examples: " + ", ".join(f'"{e}"' for e in cat.examples) + "."
        lines.append(line)
    return "\n".join(lines)


_CLASSIFICATION_SLOTS = {
    "persona": "You are a meticulous semantic annotator for long documents.",
    "instructions": (
        "Read the text and identify every category from the list below that "
        "applies to it. Use the definitions and examples to decide; do not "
        "invent categories that are not listed."),
    "format": (
        'Respond with a JSON array of matching category names, for example '
        '["CategoryA", "CategoryB"]. Respond with [] if no category applies. '
        "Output nothing else."),
}

_IE_SLOTS = {
    "persona": "You are a meticulous entity annotator for long documents.",
    "instructions": (
        "Copy the text exactly, wrapping each entity mention with an opening "
        "and closing tag named after its category from the list below, like "
        "<CategoryA>mention</CategoryA>. Tags may nest when a mention "
        "contains another. Never change, add, or remove any character of the "
        "original text, and never use a tag name that is not listed."),
    "format": "Return only the annotated text, with no commentary.",
}


def render_fewshot(examples: Iterable[FewShot]) -> str:
    blocks = []
    for ex in examples:
        blocks.append(f"Text:\n{ex.text}\nAnswer: {json.dumps(list(ex.labels))}\n")
    return "\n".join(blocks) + ("\n" if blocks else "")


def build_classification_prompt(chunk_text: str, categories: Iterable[TagCategory],
                                template: PromptTemplate | None = None,
                                fewshot: Iterable[FewShot] = ()) -> str:
    template = template or PromptTemplate.builtin("classification")
    return template.render(categories=render_categories_block(categories),
                           chunk=chunk_text, fewshot=render_fewshot(fewshot),
                           **_CLASSIFICATION_SLOTS)


def build_ie_prompt(chunk_text: str, categories: Iterable[TagCategory],
                    template: PromptTemplate | None = None) -> str:
    template = template or PromptTemplate.builtin("ie")
    return template.render(categories=render_categories_block(categories),
                           chunk=chunk_text, fewshot="", **_IE_SLOTS)


_NONE_TOKEN = re.compile(r"^[\s`'\".]*none[\s`'\".]*$", re.IGNORECASE)


def parse_classification_output(raw: str, categories: Iterable[TagCategory] | Iterable[str]) -> ParsedLabels:
    """Extract the first JSON array of strings from a model response.

    Unknown names are filtered out and reported as rejected; an empty array
    or the literal NONE convention yields the empty set. Raises
    UnparseableOutput when no array can be found.
    """
    known = {c.name if isinstance(c, TagCategory) else str(c) for c in categories}
    decoder = json.JSONDecoder()
    idx = raw.find("[")
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(raw, idx)
        except ValueError:
            idx = raw.find("[", idx + 1)
            continue
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            labels = frozenset(v for v in value if v in known)
            rejected = tuple(v for v in value if v not in known)
            return ParsedLabels(labels=labels, rejected=rejected)
        idx = raw.find("[", idx + 1)
    if _NONE_TOKEN.match(raw):
        return ParsedLabels(labels=frozenset(), rejected=())
    raise UnparseableOutput(f"no JSON array of strings in response: {raw[:80]!r}")
