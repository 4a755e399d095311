"""NER engines behind the bridge.

Two engines ship: the spaCy adapter (used when spacy and a model are
installed) and a deterministic rule engine that matches surface phrases
from a lexicon file. Both return entities with UTF-8 *byte* offsets; the
conversion from Python character offsets happens here, in one place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class Entity:
    label: str
    start: int  # UTF-8 byte offset
    end: int


class NerModel(Protocol):
    name: str
    labels: tuple[str, ...]

    def analyze(self, text: str) -> list[Entity]: ...


def char_to_byte_offsets(text: str) -> list[int]:
    offsets = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        cp = ord(ch)
        pos += 1 if cp < 0x80 else 2 if cp < 0x800 else 3 if cp < 0x10000 else 4
        offsets[i + 1] = pos
    return offsets


class RuleModel:
    """Lexicon matcher emitting every substring occurrence of every phrase.

    Deterministic stand-in for a statistical model: output order is
    (start asc, longer first, label asc). Overlap resolution is the
    client's job, exactly as with a real NER model.
    """

    def __init__(self, lexicon_path: str):
        with open(lexicon_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        self.surfaces = {str(label): tuple(str(p) for p in phrases)
                         for label, phrases in raw.items()}
        self.labels = tuple(sorted(self.surfaces))
        self.name = "rules"

    def analyze(self, text: str) -> list[Entity]:
        offsets = char_to_byte_offsets(text)
        found: list[Entity] = []
        for label in self.labels:
            for phrase in self.surfaces[label]:
                start = text.find(phrase)
                while start != -1:
                    found.append(Entity(label=label,
                                        start=offsets[start],
                                        end=offsets[start + len(phrase)]))
                    start = text.find(phrase, start + 1)
        found.sort(key=lambda e: (e.start, -e.end, e.label))
        return found


class SpacyModel:
    """Adapter over a loaded spaCy pipeline; requires spacy to be installed."""

    def __init__(self, model_name: str):
        import spacy

        self._nlp = spacy.load(model_name)
        self.name = model_name
        try:
            self.labels = tuple(sorted(self._nlp.get_pipe("ner").labels))
        except KeyError:
            self.labels = ()

    def analyze(self, text: str) -> list[Entity]:
        offsets = char_to_byte_offsets(text)
        doc = self._nlp(text)
        found = [Entity(label=ent.label_,
                        start=offsets[ent.start_char],
                        end=offsets[ent.end_char])
                 for ent in doc.ents]
        found.sort(key=lambda e: (e.start, -e.end, e.label))
        return found


def load_model(spec: str) -> NerModel:
    """``rules:<lexicon.json>`` or a spaCy pipeline name like
    ``en_core_web_sm``."""
    if spec.startswith("rules:"):
        return RuleModel(spec[len("rules:"):])
    try:
        return SpacyModel(spec)
    except ImportError as exc:
        raise SystemExit(
            f"model {spec!r} needs spacy installed; use rules:<lexicon.json> "
            f"for the built-in rule engine ({exc})") from exc
