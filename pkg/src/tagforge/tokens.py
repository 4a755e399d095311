"""Token estimation used for chunk budgets and haystack sizing.

The estimators are heuristics standing in for proprietary tokenizers; exact
counts can be supplied through an external count file keyed by instance id.
Both heuristics are monotone under concatenation and map "" to 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class EstimatorMode(str, Enum):
    CHARS_DIV_4 = "chars_div_4"
    WORDS_X_4_3 = "whitespace_words_x4/3"
    EXTERNAL = "external_count_file"


@dataclass(frozen=True)
class TokenEstimator:
    mode: EstimatorMode = EstimatorMode.CHARS_DIV_4
    counts: dict[str, int] = field(default_factory=dict)

    def estimate(self, text: str, *, key: str | None = None) -> int:
        """Estimated token count of ``text``.

        In EXTERNAL mode an exact count is served when ``key`` is present in
        the count file; raw text falls back to the chars_div_4 heuristic.
        """
        if self.mode is EstimatorMode.EXTERNAL and key is not None and key in self.counts:
            return self.counts[key]
        if not text:
            return 0
        if self.mode is EstimatorMode.WORDS_X_4_3:
            return math.ceil(len(text.split()) * 4 / 3)
        return math.ceil(len(text) / 4)

    @classmethod
    def from_count_file(cls, path: str | Path) -> "TokenEstimator":
        with open(path, encoding="utf-8") as fh:
            counts = {str(k): int(v) for k, v in json.load(fh).items()}
        return cls(mode=EstimatorMode.EXTERNAL, counts=counts)


class RunningEstimate:
    """Incremental estimate of ``sep.join(parts)`` without re-joining.

    Exact for both heuristics as long as ``sep`` is whitespace: length is
    additive, and word counts concatenate. EXTERNAL mode falls back to the
    character heuristic, matching ``estimate()`` on raw text.
    """

    def __init__(self, estimator: TokenEstimator, sep: str = " "):
        self._mode = estimator.mode
        self._sep_len = len(sep)
        self.parts = 0
        self.chars = 0
        self.words = 0

    def _value(self, chars: int, words: int) -> int:
        if chars == 0:
            return 0
        if self._mode is EstimatorMode.WORDS_X_4_3:
            return math.ceil(words * 4 / 3)
        return math.ceil(chars / 4)

    def add(self, part: str) -> None:
        self.chars += len(part) + (self._sep_len if self.parts else 0)
        self.words += len(part.split())
        self.parts += 1

    def peek(self, part: str) -> int:
        chars = self.chars + len(part) + (self._sep_len if self.parts else 0)
        return self._value(chars, self.words + len(part.split()))

    def value(self) -> int:
        return self._value(self.chars, self.words)
