import json
from pathlib import Path

import pytest

from tagforge.core import Chunk, read_documents_jsonl
from tagforge.taggers import load_categories
from tagforge.taggers.gazetteer import Lexicon, load_lexicon

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus():
    return read_documents_jsonl(FIXTURES / "corpus.jsonl")


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    return load_lexicon(FIXTURES / "lexicon.json")


@pytest.fixture(scope="session")
def privileged_categories():
    return load_categories(FIXTURES / "categories_privileged.json")


@pytest.fixture(scope="session")
def needle_records():
    with open(FIXTURES / "needles.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def make_chunk(text: str, doc_id: str = "doc", index: int = 0, start: int = 0) -> Chunk:
    return Chunk(doc_id=doc_id, index=index, start=start,
                 end=start + len(text.encode("utf-8")), text=text)


@pytest.fixture
def chunk_of():
    return make_chunk
