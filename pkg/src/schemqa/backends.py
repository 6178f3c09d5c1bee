"""Model backend abstraction: every model call in the engine flows through here.

Two implementations ship: a deterministic scripted backend for tests and
replay, and a generic HTTP chat-completions client for real providers.
A recording wrapper turns live sessions into replayable fixture files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import BackendError, FixtureMiss, HttpError, RecordConflict, StorageFailure, Timeout

logger = logging.getLogger(__name__)

# Prompt kinds routed through the backend.
CAN = "CAN"
CAN_REVISED = "CAN_REVISED"
SUM = "SUM"
VAL = "VAL"
RANK = "RANK"
ROUTE = "ROUTE"
REACT = "REACT"
JUDGE = "JUDGE"
ALT_TEXT = "ALT_TEXT"

PROMPT_KINDS = (CAN, CAN_REVISED, SUM, VAL, RANK, ROUTE, REACT, JUDGE, ALT_TEXT)

# Lenient-mode fallbacks, chosen to be harmless for each consumer.
DEFAULT_RESPONSES: dict[str, str] = {
    CAN: "(a) not stated (b) unknown",
    CAN_REVISED: "(a) not stated (b) unknown",
    SUM: "No supporting evidence was found in the passages.",
    VAL: "False",
    RANK: "0",
    ROUTE: "PFD",
    REACT: "Thought: nothing further to look up.\nAction: FINISH",
    JUDGE: "0.5 | no judgement available",
    ALT_TEXT: "process diagram image",
}


@dataclass(frozen=True)
class ModelRequest:
    """Backend-neutral envelope for one model call.

    key_fields are the salient identifiers (question text, candidate or
    pair indices, template version) that make the call replayable without
    tying fixtures to exact prompt bytes.
    """

    prompt_kind: str
    messages: tuple[tuple[str, str], ...]
    key_fields: tuple[str, ...] = ()
    attachments: tuple[str, ...] = ()
    max_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.prompt_kind not in PROMPT_KINDS:
            raise BackendError(f"unknown prompt kind {self.prompt_kind!r}")
        if not any(role == "user" for role, _ in self.messages):
            raise BackendError("request needs at least one user message")

    def rendered(self) -> str:
        return "\n\n".join(f"[{role}]\n{text}" for role, text in self.messages)


@dataclass(frozen=True)
class ModelResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0


class Backend(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


def fixture_key(request: ModelRequest) -> str:
    """Stable lookup key for a request: hash of kind + salient fields."""
    payload = "\x1f".join((request.prompt_kind,) + request.key_fields)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def prompt_sha(request: ModelRequest) -> str:
    return hashlib.sha256(request.rendered().encode("utf-8")).hexdigest()[:16]


Handler = Callable[[ModelRequest], str]


class ScriptedBackend:
    """Deterministic fixture-driven backend.

    Resolution order per request: the (kind, key) fixture table, then a
    per-kind handler (constant string, FIFO list, or callable), then - in
    strict mode - a FixtureMiss naming kind and key, otherwise the canned
    per-kind default.
    """

    kind = "scripted"

    def __init__(
        self,
        table: dict[tuple[str, str], str] | None = None,
        handlers: dict[str, str | list[str] | Handler] | None = None,
        strict: bool = False,
    ) -> None:
        self.table = dict(table or {})
        self.handlers = dict(handlers or {})
        self.strict = strict
        self.calls: list[ModelRequest] = []

    def complete(self, request: ModelRequest) -> ModelResponse:
        self.calls.append(request)
        key = fixture_key(request)
        text = self.table.get((request.prompt_kind, key))
        if text is None:
            handler = self.handlers.get(request.prompt_kind)
            if isinstance(handler, str):
                text = handler
            elif isinstance(handler, list):
                if not handler:
                    raise FixtureMiss(
                        f"scripted response list for kind {request.prompt_kind} exhausted"
                    )
                text = handler.pop(0)
            elif callable(handler):
                text = handler(request)
        if text is None:
            if self.strict:
                raise FixtureMiss(f"no fixture for kind={request.prompt_kind} key={key}")
            text = DEFAULT_RESPONSES[request.prompt_kind]
        prompt_tokens = sum(len(t.split()) for _, t in request.messages)
        return ModelResponse(
            text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=len(text.split()),
            latency_ms=0,
        )

    def call_count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.calls)
        return sum(1 for r in self.calls if r.prompt_kind == kind)


def load_fixtures(path: str | Path) -> dict[tuple[str, str], str]:
    """Read a newline-delimited fixture file into a (kind, key) -> text table."""
    table: dict[tuple[str, str], str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                table[(rec["kind"], rec["key"])] = rec["text"]
    except OSError as exc:
        raise StorageFailure(f"cannot read fixture file {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise StorageFailure(f"malformed fixture file {path}: {exc}") from exc
    return table


class RecordingBackend:
    """Wraps a live backend and appends replay fixtures for every call.

    Recording the same key twice with a different response raises
    RecordConflict: that would make replay ambiguous.
    """

    kind = "recording"

    def __init__(self, inner: Backend, path: str | Path) -> None:
        self.inner = inner
        self.path = Path(path)
        self.entries: dict[tuple[str, str], str] = {}
        if self.path.exists():
            self.entries = load_fixtures(self.path)

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        self.record(request, response)
        return response

    def record(self, request: ModelRequest, response: ModelResponse) -> dict:
        key = fixture_key(request)
        slot = (request.prompt_kind, key)
        if slot in self.entries:
            if self.entries[slot] != response.text:
                raise RecordConflict(
                    f"key {key} for kind {request.prompt_kind} already recorded with different text"
                )
            return {"kind": request.prompt_kind, "key": key, "text": response.text}
        entry = {"kind": request.prompt_kind, "key": key, "text": response.text}
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
        except OSError as exc:
            raise StorageFailure(f"cannot append fixture to {self.path}: {exc}") from exc
        self.entries[slot] = response.text
        return entry


class HttpBackend:
    """Generic chat-completions HTTP client.

    Sends the de-facto `{model, messages[], temperature, max_tokens}` JSON
    shape and retries transient failures (connection errors, timeouts,
    429/5xx) with exponential backoff. In-flight requests across all
    threads sharing the handle are bounded by the concurrency limit.
    """

    kind = "http"
    TRANSIENT_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        model: str,
        token: str | None = None,
        timeout_s: float = 30.0,
        retries: int = 3,
        backoff_s: float = 0.5,
        concurrency: int = 4,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.token = token
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self._slots = threading.BoundedSemaphore(max(1, concurrency))

    def _payload(self, request: ModelRequest) -> dict:
        messages = []
        for role, text in request.messages:
            messages.append({"role": role, "content": text})
        if request.attachments:
            # Attach image refs to the last user message, provider-style.
            content: list[dict] = [{"type": "text", "text": messages[-1]["content"]}]
            content += [
                {"type": "image_url", "image_url": {"url": ref}} for ref in request.attachments
            ]
            messages[-1]["content"] = content
        return {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: ModelRequest) -> ModelResponse:
        with self._slots:
            return self._complete(request)

    def _complete(self, request: ModelRequest) -> ModelResponse:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        payload = self._payload(request)
        last_error: Exception | None = None
        started = time.perf_counter()
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = httpx.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
            except httpx.TimeoutException as exc:
                last_error = exc
                logger.warning("backend timeout (attempt %d): %s", attempt + 1, exc)
                continue
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("backend transport error (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in self.TRANSIENT_STATUSES:
                last_error = HttpError(f"status {resp.status_code}: {resp.text[:200]}")
                logger.warning("backend transient status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise HttpError(f"status {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {})
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise HttpError(f"malformed completion response: {exc}") from exc
            return ModelResponse(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                latency_ms=int((time.perf_counter() - started) * 1000),
            )
        if isinstance(last_error, HttpError):
            raise last_error
        raise Timeout(f"backend unreachable after {self.retries + 1} attempts: {last_error}")


@dataclass
class CallDigest:
    """Replayable record of one backend call."""

    kind: str
    key: str
    prompt_sha256: str
    response: str
    latency_ms: int = 0

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "key": self.key,
            "prompt_sha256": self.prompt_sha256,
            "response": self.response,
            "latency_ms": self.latency_ms,
        }

    @staticmethod
    def from_record(rec: dict) -> "CallDigest":
        return CallDigest(
            kind=rec["kind"],
            key=rec["key"],
            prompt_sha256=rec["prompt_sha256"],
            response=rec["response"],
            latency_ms=int(rec.get("latency_ms", 0)),
        )


@dataclass
class TraceRecorder:
    """Request-local, ordered record of every backend call."""

    calls: list[CallDigest] = field(default_factory=list)

    def mark(self) -> int:
        return len(self.calls)

    def since(self, mark: int) -> list[CallDigest]:
        return self.calls[mark:]


class TracingBackend:
    """Backend wrapper that records every call into a TraceRecorder."""

    def __init__(self, inner: Backend, recorder: TraceRecorder) -> None:
        self.inner = inner
        self.recorder = recorder
        self.kind = getattr(inner, "kind", "unknown")

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        self.recorder.calls.append(
            CallDigest(
                kind=request.prompt_kind,
                key=fixture_key(request),
                prompt_sha256=prompt_sha(request),
                response=response.text,
                latency_ms=response.latency_ms,
            )
        )
        return response


def backend_from_digests(digests: list[CallDigest], strict: bool = True) -> ScriptedBackend:
    """Build a scripted backend that replays an archived call sequence."""
    table = {(d.kind, d.key): d.response for d in digests}
    return ScriptedBackend(table=table, strict=strict)
