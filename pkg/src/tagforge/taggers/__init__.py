"""Tagging strategies: gazetteer NER, external bridge, LLM IE/classification,
and the hybrid merge. All taggers are stateless given their config and never
mutate chunk text."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from ..core import TagCategory, digest_of


class TaggerKind(str, Enum):
    GAZETTEER = "gazetteer"
    EXTERNAL = "external"
    LLM_CLASSIFICATION = "llm_classification"
    LLM_IE = "llm_ie"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class TaggerConfig:
    """Full identity of a tagging run; its hash keys the tag cache."""

    kind: TaggerKind
    categories: tuple[TagCategory, ...]
    version: str = "1"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("TaggerConfig.categories must be nonempty")
        if isinstance(self.kind, str) and not isinstance(self.kind, TaggerKind):
            object.__setattr__(self, "kind", TaggerKind(self.kind))
        if not isinstance(self.categories, tuple):
            object.__setattr__(self, "categories", tuple(self.categories))
        names = [c.name for c in self.categories]
        if len(names) != len(set(names)):
            raise ValueError("category names must be unique")

    def category_names(self) -> frozenset[str]:
        return frozenset(c.name for c in self.categories)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "version": self.version,
            "params": self.params,
            "categories": [{"name": c.name, "definition": c.definition,
                            "examples": list(c.examples)} for c in self.categories],
        }

    def config_hash(self) -> str:
        return digest_of(self.to_dict())

    def provenance(self) -> str:
        return f"{self.kind.value}:{self.config_hash()}"


def load_categories(path: str | Path) -> tuple[TagCategory, ...]:
    """Category-set file: JSON ``[{name, definition, examples[]}]``."""
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    return tuple(TagCategory(name=e["name"], definition=e.get("definition", ""),
                             examples=tuple(e.get("examples", ()))) for e in entries)


def builtin_categories(name: str = "ner18") -> tuple[TagCategory, ...]:
    """Category sets shipped with the package (currently ``ner18``)."""
    data = resources.files("tagforge").joinpath(f"data/categories_{name}.json")
    entries = json.loads(data.read_text(encoding="utf-8"))
    return tuple(TagCategory(name=e["name"], definition=e.get("definition", ""),
                             examples=tuple(e.get("examples", ()))) for e in entries)


from .gazetteer import Lexicon, load_lexicon, tag_gazetteer  # noqa: E402
from .external import (  # noqa: E402
    BridgeUnavailable,
    EntityLabelMap,
    MappingMissing,
    ProtocolError,
    ReplayBridge,
    SubprocessBridge,
    default_label_map,
    load_label_map,
    tag_external,
)
from .prompts import (  # noqa: E402
    FewShot,
    ParsedLabels,
    PromptTemplate,
    TemplateSlotMissing,
    UnparseableOutput,
    build_classification_prompt,
    build_ie_prompt,
    parse_classification_output,
)
from .llm import (  # noqa: E402
    ChunkMismatch,
    TagStats,
    merge_hybrid,
    tag_hybrid,
    tag_llm_classification,
    tag_llm_ie,
)

__all__ = [
    "TaggerKind", "TaggerConfig", "load_categories", "builtin_categories",
    "Lexicon", "load_lexicon", "tag_gazetteer",
    "EntityLabelMap", "default_label_map", "load_label_map", "tag_external",
    "SubprocessBridge", "ReplayBridge", "BridgeUnavailable", "ProtocolError",
    "MappingMissing",
    "PromptTemplate", "FewShot", "ParsedLabels", "TemplateSlotMissing",
    "UnparseableOutput", "build_classification_prompt", "build_ie_prompt",
    "parse_classification_output",
    "TagStats", "ChunkMismatch", "merge_hybrid", "tag_hybrid",
    "tag_llm_classification", "tag_llm_ie",
]
