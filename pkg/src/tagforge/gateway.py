"""Uniform client for chat-completion APIs, plus mock and record/replay.

The decoding contract is enforced at request construction: temperature must
be 0 unless thinking mode is enabled (thinking supersedes temperature).
Nothing in the test suite needs network access; the mock and the replay
store stand in for hosted models.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple

from .core import HASH_ALGO, TagforgeError, digest_of

logger = logging.getLogger(__name__)


class GatewayError(TagforgeError):
    pass


class InvalidRequest(GatewayError):
    pass


class AuthError(GatewayError):
    pass


class Throttled(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class ContextWindowExceeded(GatewayError):
    """Surfaced distinctly so the harness can mark the instance, not crash."""


class FixtureMiss(GatewayError):
    def __init__(self, request_hash: str):
        super().__init__(f"no recorded fixture for request {request_hash}")
        self.request_hash = request_hash


class Usage(NamedTuple):
    input_tokens: int
    output_tokens: int


@dataclass(frozen=True)
class CompletionRequest:
    system: str
    user: str
    max_output_tokens: int = 1024
    temperature: float = 0.0
    thinking: bool = False
    model_id: str = ""

    def __post_init__(self) -> None:
        if self.max_output_tokens < 1:
            raise InvalidRequest("max_output_tokens must be >= 1")
        if not 0.0 <= self.temperature <= 1.0:
            raise InvalidRequest("temperature must be in [0, 1]")
        if not self.thinking and self.temperature != 0.0:
            raise InvalidRequest("temperature must be 0 unless thinking is enabled")

    def canonical_hash(self) -> str:
        return digest_of({
            "system": self.system, "user": self.user,
            "max_output_tokens": self.max_output_tokens,
            "temperature": self.temperature, "thinking": self.thinking,
            "model_id": self.model_id,
        })


@dataclass(frozen=True)
class CompletionResult:
    text: str
    reasoning: str | None = None
    usage: Usage = Usage(0, 0)
    latency_ms: int = 0
    attempt: int = 1


class Gateway:
    def complete(self, req: CompletionRequest) -> CompletionResult:
        raise NotImplementedError


class MockGateway(Gateway):
    """Deterministic in-memory gateway for tests and smoke runs.

    Resolution order: exact table hit by request hash, then ``fn``, then
    ``default``. Every call is counted.
    """

    def __init__(self, table: dict[str, str] | None = None,
                 fn: Callable[[CompletionRequest], str] | None = None,
                 default: str | None = None):
        self.table = dict(table or {})
        self.fn = fn
        self.default = default
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResult:
        with self._lock:
            self.calls += 1
        key = req.canonical_hash()
        if key in self.table:
            text = self.table[key]
        elif self.fn is not None:
            text = self.fn(req)
        elif self.default is not None:
            text = self.default
        else:
            raise FixtureMiss(key)
        usage = Usage(len(req.system + req.user) // 4, len(text) // 4)
        return CompletionResult(text=text, usage=usage)


class _TokenBucket:
    def __init__(self, rate_per_s: float, burst: int):
        self.rate = rate_per_s
        self.capacity = float(burst)
        self.tokens = float(burst)
        self.stamp = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


def _build_openai(req: CompletionRequest, model: str) -> dict:
    messages = []
    if req.system:
        messages.append({"role": "system", "content": req.system})
    messages.append({"role": "user", "content": req.user})
    return {"model": model, "messages": messages,
            "max_tokens": req.max_output_tokens, "temperature": req.temperature}


def _parse_openai(body: dict) -> CompletionResult:
    choice = body["choices"][0]
    usage = body.get("usage", {})
    return CompletionResult(
        text=choice["message"]["content"] or "",
        usage=Usage(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)))


def _build_anthropic(req: CompletionRequest, model: str) -> dict:
    payload: dict = {"model": model,
                     "messages": [{"role": "user", "content": req.user}],
                     "max_tokens": req.max_output_tokens,
                     "temperature": req.temperature}
    if req.system:
        payload["system"] = req.system
    if req.thinking:
        payload["thinking"] = {"type": "enabled",
                               "budget_tokens": max(1024, req.max_output_tokens // 2)}
        del payload["temperature"]  # thinking supersedes temperature
    return payload


def _parse_anthropic(body: dict) -> CompletionResult:
    text_parts, reasoning_parts = [], []
    for block in body.get("content", []):
        if block.get("type") == "text":
            text_parts.append(block.get("text", ""))
        elif block.get("type") == "thinking":
            reasoning_parts.append(block.get("thinking", ""))
    usage = body.get("usage", {})
    return CompletionResult(
        text="".join(text_parts),
        reasoning="".join(reasoning_parts) or None,
        usage=Usage(usage.get("input_tokens", 0), usage.get("output_tokens", 0)))


_PROVIDERS = {
    "openai": (_build_openai, _parse_openai),
    "anthropic": (_build_anthropic, _parse_anthropic),
}

_CONTEXT_HINTS = ("context window", "context length", "too long", "maximum context",
                  "prompt is too long", "context_length_exceeded")


class HttpGateway(Gateway):
    """Provider-agnostic HTTP JSON gateway with retry and rate limiting.

    Credentials come from the environment: TAGFORGE_LLM_ENDPOINT,
    TAGFORGE_LLM_API_KEY, TAGFORGE_LLM_MODEL, TAGFORGE_LLM_PROVIDER.
    """

    def __init__(self, endpoint: str, api_key: str = "", model_id: str = "",
                 provider: str = "openai", timeout: float = 60.0,
                 max_retries: int = 3, backoff_s: float = 0.5,
                 rate_per_s: float | None = None, max_in_flight: int = 4):
        if provider not in _PROVIDERS:
            raise GatewayError(f"unknown provider {provider!r}")
        self.endpoint = endpoint
        self.api_key = api_key
        self.model_id = model_id
        self.provider = provider
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._bucket = _TokenBucket(rate_per_s, burst=max(1, int(rate_per_s))) if rate_per_s else None
        self._in_flight = threading.BoundedSemaphore(max_in_flight)
        self._sleep = time.sleep
        import requests  # deferred so offline use never touches it

        self._session = requests.Session()
        self._requests = requests

    @classmethod
    def from_env(cls, **kwargs) -> "HttpGateway":
        endpoint = os.environ.get("TAGFORGE_LLM_ENDPOINT", "")
        if not endpoint:
            raise GatewayError("TAGFORGE_LLM_ENDPOINT is not set")
        return cls(endpoint=endpoint,
                   api_key=os.environ.get("TAGFORGE_LLM_API_KEY", ""),
                   model_id=os.environ.get("TAGFORGE_LLM_MODEL", ""),
                   provider=os.environ.get("TAGFORGE_LLM_PROVIDER", "openai"),
                   **kwargs)

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        if self.provider == "anthropic":
            headers["x-api-key"] = self.api_key
            headers["anthropic-version"] = "2023-06-01"
        elif self.api_key:
            headers["authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, req: CompletionRequest) -> CompletionResult:
        build, parse = _PROVIDERS[self.provider]
        payload = build(req, req.model_id or self.model_id)
        last_err: GatewayError | None = None
        with self._in_flight:
            for attempt in range(1, self.max_retries + 2):
                if self._bucket:
                    self._bucket.acquire()
                started = time.monotonic()
                try:
                    resp = self._session.post(self.endpoint, json=payload,
                                              headers=self._headers(), timeout=self.timeout)
                except self._requests.RequestException as exc:
                    last_err = TransportError(str(exc))
                else:
                    if resp.status_code in (401, 403):
                        raise AuthError(f"HTTP {resp.status_code}")
                    if resp.status_code == 429:
                        last_err = Throttled("HTTP 429")
                    elif resp.status_code >= 500:
                        last_err = TransportError(f"HTTP {resp.status_code}")
                    elif resp.status_code >= 400:
                        lowered = resp.text.lower()
                        if any(h in lowered for h in _CONTEXT_HINTS):
                            raise ContextWindowExceeded(resp.text[:500])
                        raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                    else:
                        result = parse(resp.json())
                        latency = int((time.monotonic() - started) * 1000)
                        return CompletionResult(text=result.text, reasoning=result.reasoning,
                                                usage=result.usage, latency_ms=latency,
                                                attempt=attempt)
                if attempt <= self.max_retries:
                    self._sleep(self.backoff_s * (2 ** (attempt - 1)))
        raise last_err if last_err else TransportError("no attempts made")


class ReplayMode(str, Enum):
    RECORD = "record"
    REPLAY = "replay"
    PASSTHROUGH = "passthrough"


@dataclass
class RecordReplayGateway(Gateway):
    """Content-addressed, append-only fixture store wrapped around a gateway.

    record: serve from the store when present, else call through and persist.
    replay: serve only from the store; a miss is an error. passthrough: no
    store interaction at all.
    """

    root: Path
    mode: ReplayMode = ReplayMode.REPLAY
    inner: Gateway | None = None
    hits: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        if self.mode is ReplayMode.RECORD:
            self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def complete(self, req: CompletionRequest) -> CompletionResult:
        if self.mode is ReplayMode.PASSTHROUGH:
            if self.inner is None:
                raise GatewayError("passthrough mode needs an inner gateway")
            return self.inner.complete(req)
        key = req.canonical_hash()
        path = self._path(key)
        if path.exists():
            entry = json.loads(path.read_text(encoding="utf-8"))
            resp = entry["response"]
            self.hits += 1
            return CompletionResult(text=resp["text"], reasoning=resp.get("reasoning"),
                                    usage=Usage(*resp.get("usage", (0, 0))))
        if self.mode is ReplayMode.REPLAY:
            raise FixtureMiss(key)
        if self.inner is None:
            raise GatewayError("record mode needs an inner gateway")
        result = self.inner.complete(req)
        entry = {
            "hash_algo": HASH_ALGO,
            "request": {"system": req.system, "user": req.user,
                        "max_output_tokens": req.max_output_tokens,
                        "temperature": req.temperature, "thinking": req.thinking,
                        "model_id": req.model_id},
            "response": {"text": result.text, "reasoning": result.reasoning,
                         "usage": list(result.usage)},
        }
        tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False, indent=1), encoding="utf-8")
        os.replace(tmp, path)
        return result


def resolve_gateway(spec: str, *, oracle: Callable[[CompletionRequest], str] | None = None) -> Gateway:
    """CLI-facing gateway factory.

    ``http`` (env-configured), ``replay:<dir>``, ``record:<dir>`` (records
    through http), ``oracle`` (answers via the provided callable), ``empty``
    (always returns "").
    """
    if spec == "http":
        return HttpGateway.from_env()
    if spec.startswith("replay:"):
        return RecordReplayGateway(root=Path(spec[7:]), mode=ReplayMode.REPLAY)
    if spec.startswith("record:"):
        return RecordReplayGateway(root=Path(spec[7:]), mode=ReplayMode.RECORD,
                                   inner=HttpGateway.from_env())
    if spec == "oracle":
        if oracle is None:
            raise GatewayError("oracle gateway requested but no oracle available")
        return MockGateway(fn=oracle)
    if spec == "empty":
        return MockGateway(default="")
    raise GatewayError(f"unknown gateway spec {spec!r}")
