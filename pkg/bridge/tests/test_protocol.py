"""Shared protocol conformance suite for the bridge process.

Runs a live bridge subprocess with the rule engine; the spaCy path is
exercised only when spacy is importable.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURES = REPO_ROOT / "tests" / "fixtures"
LEXICON = FIXTURES / "bridge_lexicon.json"
DIALOGUE = FIXTURES / "bridge_dialogue.json"


def spawn(model: str | None = None) -> subprocess.Popen:
    cmd = [sys.executable, "-m", "tagforge_bridge",
           "--model", model or f"rules:{LEXICON}"]
    return subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            text=True, encoding="utf-8", bufsize=1)


def talk(proc: subprocess.Popen, lines: list[str]) -> list[dict]:
    out, _ = proc.communicate("".join(l + "\n" for l in lines), timeout=30)
    return [json.loads(l) for l in out.splitlines() if l.strip()]


class TestHandshake:
    def test_first_line_shape(self):
        proc = spawn()
        replies = talk(proc, [])
        assert proc.returncode == 0
        handshake = replies[0]
        assert handshake["protocol"] == "tagforge-bridge"
        assert handshake["version"] == 1
        assert isinstance(handshake["labels"], list) and handshake["labels"]

    def test_eof_clean_exit(self):
        proc = spawn()
        replies = talk(proc, [])
        assert proc.returncode == 0
        assert len(replies) == 1  # handshake only


class TestRequestLoop:
    def test_order_preservation(self):
        requests = [json.dumps({"id": f"r{i}", "text": f"request number {i}"})
                    for i in range(6)]
        replies = talk(spawn(), requests)
        assert [r["id"] for r in replies[1:]] == [f"r{i}" for i in range(6)]

    def test_entities_for_known_surface(self):
        replies = talk(spawn(), [json.dumps({"id": "x", "text": "Marie Curie won a Nobel Prize."})])
        entities = replies[1]["entities"]
        assert {"label": "PERSON", "start": 0, "end": 11} in entities

    def test_no_entities(self):
        replies = talk(spawn(), [json.dumps({"id": "x", "text": "the the the"})])
        assert replies[1] == {"id": "x", "entities": []}

    def test_malformed_line_recovery(self):
        lines = ["this is not json{{",
                 json.dumps({"id": "after", "text": "Marie Curie"})]
        proc = spawn()
        replies = talk(proc, lines)
        assert proc.returncode == 0
        assert replies[1]["id"] is None
        assert "error" in replies[1]
        assert replies[2]["id"] == "after"
        assert replies[2]["entities"]

    def test_missing_text_is_error_with_id(self):
        replies = talk(spawn(), [json.dumps({"id": "bad", "nottext": 1})])
        assert replies[1]["id"] == "bad"
        assert "error" in replies[1]

    def test_empty_lines_skipped(self):
        lines = ["", json.dumps({"id": "a", "text": "plain words"}), ""]
        replies = talk(spawn(), lines)
        assert [r.get("id") for r in replies[1:]] == ["a"]


class TestOffsetFidelity:
    def test_multibyte_byte_offsets(self):
        text = "José rode the tram to the Glass Foundry with Müller."
        replies = talk(spawn(), [json.dumps({"id": "mb", "text": text})])
        data = text.encode("utf-8")
        surfaces = [data[e["start"]:e["end"]].decode("utf-8")
                    for e in replies[1]["entities"]]
        assert surfaces == ["José", "Glass Foundry", "Müller"]

    def test_every_fixture_surface_decodes(self):
        fixture = json.loads(DIALOGUE.read_text(encoding="utf-8"))
        requests = [json.dumps({"id": ex["request"]["id"], "text": ex["request"]["text"]})
                    for ex in fixture["exchanges"]]
        replies = talk(spawn(), requests)
        for ex, reply in zip(fixture["exchanges"], replies[1:]):
            data = ex["request"]["text"].encode("utf-8")
            for ent in reply["entities"]:
                assert 0 <= ent["start"] < ent["end"] <= len(data)
                data[ent["start"]:ent["end"]].decode("utf-8")


class TestCommittedDialogue:
    def test_live_bridge_reproduces_fixture(self):
        # The fixture was computed with an independent string-search oracle;
        # a live bridge run must reproduce it entity-for-entity.
        fixture = json.loads(DIALOGUE.read_text(encoding="utf-8"))
        requests = [json.dumps({"id": ex["request"]["id"], "text": ex["request"]["text"]})
                    for ex in fixture["exchanges"]]
        replies = talk(spawn(), requests)
        handshake = replies[0]
        assert handshake["labels"] == fixture["handshake"]["labels"]
        for ex, reply in zip(fixture["exchanges"], replies[1:]):
            assert reply["id"] == ex["response"]["id"]
            assert reply["entities"] == ex["response"]["entities"]


def _spacy_model_available() -> bool:
    try:
        import spacy

        spacy.load("en_core_web_sm")
        return True
    except Exception:
        return False


@pytest.mark.skipif(not _spacy_model_available(),
                    reason="spacy / en_core_web_sm not installed")
class TestSpacyAdapter:
    def test_handshake_labels_and_person(self):
        proc = spawn(model="en_core_web_sm")
        replies = talk(proc, [json.dumps({"id": "s", "text": "Marie Curie won a Nobel Prize."})])
        assert replies[0]["protocol"] == "tagforge-bridge"
        entities = replies[1]["entities"]
        data = "Marie Curie won a Nobel Prize.".encode("utf-8")
        persons = [data[e["start"]:e["end"]].decode() for e in entities
                   if e["label"] == "PERSON"]
        assert "Marie Curie" in persons
