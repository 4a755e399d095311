"""Benchmark harness: haystack construction, prompt assembly, scoring, and
resumable evaluation runs."""

from .haystack import (
    CorpusTooSmall,
    HaystackSpec,
    NeedleCollision,
    NeedleSpec,
    PromptMode,
    assemble_prompt,
    build_haystack,
    snippet_pool,
)
from .runner import (
    Complexity,
    EvalRecord,
    EvalTask,
    MCQInstance,
    format_mcq_question,
    nolima_tasks,
    novelqa_tasks,
    read_records,
    run_eval,
    truncate_and_filter,
)
from .scoring import (
    ZeroShortAccuracy,
    accuracy_table,
    extract_mcq_letter,
    extremum_drop_rate,
    score_contains,
    score_mcq,
)

__all__ = [
    "CorpusTooSmall", "HaystackSpec", "NeedleCollision", "NeedleSpec",
    "PromptMode", "assemble_prompt", "build_haystack", "snippet_pool",
    "Complexity", "EvalRecord", "EvalTask", "MCQInstance",
    "format_mcq_question", "nolima_tasks", "novelqa_tasks", "read_records",
    "run_eval", "truncate_and_filter",
    "ZeroShortAccuracy", "accuracy_table", "extract_mcq_letter",
    "extremum_drop_rate", "score_contains", "score_mcq",
]
