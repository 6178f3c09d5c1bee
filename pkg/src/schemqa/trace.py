"""Request trace archives: persistence and deterministic replay.

An archive stores everything needed to rebuild its FinalAnswer without a
live model: the request fields, the multi-turn context that was in
effect, and every backend call's (kind, key, response) digest. Replay
re-executes the whole pipeline against a scripted backend built from
those digests; tool observations that depend on mutable session state
(memory, web, wiki) are replayed from the archived ReAct trace, while
document passages are reconstructed from the archived snippets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import CallDigest, TraceRecorder, TracingBackend, backend_from_digests
from .errors import StorageFailure
from .orchestrator import FinalAnswer, QueryRequest, Task, refine_loop
from .tools import DOC_SEARCH, MEMORY_SEARCH, ToolContext, parse_memory_snippets, parse_snippets


def canonical_json(record: dict) -> str:
    """Stable byte-for-byte serialization used for golden comparisons."""
    return json.dumps(record, sort_keys=True, ensure_ascii=True, separators=(",", ":"))


@dataclass
class TraceArchive:
    request_id: str
    session_id: str
    question: str
    task: str
    gold_answer: str | None
    mc_options: list[str] | None
    context: str
    final: dict  # FinalAnswer.to_record()
    calls: list[CallDigest]
    timings: dict[str, int] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "request_id": self.request_id,
            "session_id": self.session_id,
            "question": self.question,
            "task": self.task,
            "gold_answer": self.gold_answer,
            "mc_options": self.mc_options,
            "context": self.context,
            "final": self.final,
            "calls": [c.to_record() for c in self.calls],
            "timings": self.timings,
        }

    @staticmethod
    def from_record(rec: dict) -> "TraceArchive":
        return TraceArchive(
            request_id=rec["request_id"],
            session_id=rec["session_id"],
            question=rec["question"],
            task=rec["task"],
            gold_answer=rec.get("gold_answer"),
            mc_options=rec.get("mc_options"),
            context=rec.get("context", ""),
            final=rec["final"],
            calls=[CallDigest.from_record(c) for c in rec.get("calls", [])],
            timings=rec.get("timings", {}),
        )


class TraceStore:
    """Per-session directory of append-only archive files."""

    def __init__(self, trace_dir: str | Path) -> None:
        self.dir = Path(trace_dir)

    def save(self, archive: TraceArchive) -> Path:
        session_dir = self.dir / archive.session_id
        session_dir.mkdir(parents=True, exist_ok=True)
        path = session_dir / f"{archive.request_id}.json"
        if path.exists():
            raise StorageFailure(f"archive {path} already exists; traces are append-only")
        path.write_text(canonical_json(archive.to_record()) + "\n", encoding="utf-8")
        return path

    def load_session(self, session_id: str) -> list[TraceArchive]:
        session_dir = self.dir / session_id
        if not session_dir.is_dir():
            return []
        archives = []
        for path in sorted(session_dir.glob("*.json")):
            try:
                archives.append(TraceArchive.from_record(json.loads(path.read_text(encoding="utf-8"))))
            except (OSError, json.JSONDecodeError, KeyError) as exc:
                raise StorageFailure(f"cannot load archive {path}: {exc}") from exc
        return archives


class _ReplayRunner:
    """Feeds archived tool observations back to the ReAct loop in order.

    doc_search observations additionally rebuild the passage pool by
    parsing the archived snippet lines, so the reader context renders
    byte-identically on replay.
    """

    def __init__(self, react_trace: list[dict], embedder) -> None:
        self._observations = [
            (step["action"], step["observation"])
            for step in react_trace
            if step["action"] != "FINISH"
        ]
        self._embedder = embedder
        self._cursor = 0

    def __call__(self, name: str, tool_input: str, ctx: ToolContext) -> str:
        if self._cursor >= len(self._observations):
            raise StorageFailure("replay ran past the archived tool observations")
        recorded_action, observation = self._observations[self._cursor]
        self._cursor += 1
        if recorded_action != name:
            raise StorageFailure(
                f"replay diverged: archived tool {recorded_action!r}, live request {name!r}"
            )
        if name == DOC_SEARCH:
            ctx.doc_search_calls += 1
            for hit in parse_snippets(observation, self._embedder):
                ctx.add_hit(hit)
        elif name == MEMORY_SEARCH:
            for hit in parse_memory_snippets(observation, ctx.session_id, self._embedder):
                ctx.add_hit(hit)
        return observation


def replay_archive(archive: TraceArchive, runtime_factory) -> FinalAnswer:
    """Re-run the pipeline recorded in an archive and return its FinalAnswer.

    runtime_factory(backend, tool_runner, context) must yield a runtime
    object compatible with refine_loop (the engine provides one).
    """
    recorder = TraceRecorder()
    backend = TracingBackend(backend_from_digests(archive.calls, strict=True), recorder)
    request = QueryRequest(
        session_id=archive.session_id,
        question=archive.question,
        task=Task(archive.task),
        gold_answer=archive.gold_answer,
        mc_options=tuple(archive.mc_options) if archive.mc_options else None,
    )
    runtime = runtime_factory(backend=backend, archive=archive)
    return refine_loop(request, runtime)
