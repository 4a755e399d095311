"""tagforge: semantic tagging for long contexts, with fidelity-checked
XML-style markup, content-addressed tag caching, and a QA benchmark harness."""

__version__ = "0.1.0"

from .core import (
    Chunk,
    Document,
    TagCategory,
    TagSpan,
    TaggedChunk,
    TagforgeError,
    content_hash,
    normalize,
)
from .chunking import ChunkingConfig, Strategy, chunk, dedup, reassemble
from .markup import (
    CollisionPolicy,
    MarkupPolicy,
    NestingOrder,
    render_chunk_markup,
    render_span_markup,
    strip_tags,
    verify_fidelity,
)
from .tokens import EstimatorMode, TokenEstimator

__all__ = [
    "__version__",
    "Chunk", "Document", "TagCategory", "TagSpan", "TaggedChunk",
    "TagforgeError", "content_hash", "normalize",
    "ChunkingConfig", "Strategy", "chunk", "dedup", "reassemble",
    "CollisionPolicy", "MarkupPolicy", "NestingOrder",
    "render_chunk_markup", "render_span_markup", "strip_tags", "verify_fidelity",
    "EstimatorMode", "TokenEstimator",
]
