"""The stdio request loop: one JSON object per line in, one per line out.

Responses are emitted in request order. A malformed line produces an error
object ({"id": null, "error": ...}) and the loop continues; EOF is a clean
exit. The handshake line goes out before any request is read.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from . import PROTOCOL_NAME, PROTOCOL_VERSION
from .models import NerModel


def handshake(model: NerModel) -> dict:
    return {"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION,
            "model": model.name, "labels": list(model.labels)}


def handle_line(line: str, model: NerModel) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "error": f"malformed JSON: {exc}"}
    if not isinstance(request, dict):
        return {"id": None, "error": "request must be a JSON object"}
    request_id = request.get("id")
    text = request.get("text")
    if not isinstance(text, str) or not text:
        return {"id": request_id, "error": "request needs a nonempty 'text' string"}
    entities = model.analyze(text)
    return {"id": request_id,
            "entities": [{"label": e.label, "start": e.start, "end": e.end}
                         for e in entities]}


def serve(model: NerModel, stdin: IO[str] | None = None,
          stdout: IO[str] | None = None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
        stdout.flush()

    emit(handshake(model))
    for line in stdin:
        if not line.strip():
            continue
        emit(handle_line(line, model))
    return 0
