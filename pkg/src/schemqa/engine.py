"""Engine assembly: config -> index + backend + memory + templates -> ask().

One Engine serves many concurrent requests; each request gets its own
tracing recorder and tool context. Engines on the scripted backend run
under a zero clock so answers and trace archives are byte-identical
across runs.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .backends import (
    Backend,
    HttpBackend,
    RecordingBackend,
    ScriptedBackend,
    TraceRecorder,
    TracingBackend,
    load_fixtures,
)
from .config import EngineConfig
from .corpus import DocumentBundle, DocumentKind, bundle_chunks, doc_kinds, load_bundle
from .errors import ConfigError
from .memory import SESSION_CONTEXT_TURNS, MemoryStores
from .orchestrator import AgentTarget, FinalAnswer, QueryRequest, Route, Verdict, refine_loop
from .prompts import TemplateRegistry
from .retrieval import (
    HashingEmbedder,
    JaccardReranker,
    Reranker,
    RetrievalConfig,
    SimFn,
    VectorIndex,
)
from .tools import DEFAULT_REGISTRY, ToolContext, call_tool
from .trace import TraceArchive, TraceStore, _ReplayRunner, replay_archive


def zero_clock() -> float:
    return 0.0


@dataclass
class RequestRuntime:
    """Everything refine_loop needs for one request."""

    config: EngineConfig
    templates: TemplateRegistry
    backend: Backend
    index: VectorIndex
    reranker: Reranker
    memory: MemoryStores | None
    doc_kind_map: dict[str, DocumentKind]
    registry: dict = field(default_factory=lambda: dict(DEFAULT_REGISTRY))
    tool_runner: Callable = call_tool
    fixed_context: str = ""

    def tool_context(self, request: QueryRequest, chosen_route: Route) -> ToolContext:
        kind = (
            DocumentKind.PFD
            if chosen_route.target is AgentTarget.PFD_AGENT
            else DocumentKind.PID
        )
        doc_filter = {d for d, k in self.doc_kind_map.items() if k == kind} or None
        return ToolContext(
            index=self.index,
            retrieval_config=RetrievalConfig(
                n_retrieve=self.config.retrieval.n_retrieve,
                k_rerank=self.config.retrieval.k_rerank,
                sim_fn=SimFn(self.config.retrieval.sim_fn.upper()),
            ),
            reranker=self.reranker,
            memory=self.memory,
            session_id=request.session_id,
            doc_filter=doc_filter,
            fixtures_dir=self.config.tools.fixtures_dir,
            strict_fixtures=self.config.tools.strict,
            recall_top_m=self.config.memory.recall_top_m,
        )

    def session_context(self, session_id: str) -> str:
        return self.fixed_context


@dataclass
class AskOutcome:
    final: FinalAnswer
    archive: TraceArchive


class Engine:
    def __init__(
        self,
        config: EngineConfig,
        index: VectorIndex,
        backend: Backend,
        templates: TemplateRegistry,
        memory: MemoryStores,
        doc_kind_map: dict[str, DocumentKind] | None = None,
        reranker: Reranker | None = None,
        clock: Callable[[], float] | None = None,
    ) -> None:
        self.config = config
        self.index = index
        self.backend = backend
        self.templates = templates
        self.memory = memory
        self.doc_kind_map = doc_kind_map or {}
        self.reranker = reranker or JaccardReranker()
        self.clock = clock or (zero_clock if getattr(backend, "kind", "") == "scripted" else time.time)
        self.trace_store = TraceStore(config.server.trace_dir) if config.server.trace_dir else None
        self._archives: dict[str, list[TraceArchive]] = {}
        self._seq: dict[str, int] = {}
        self._lock = threading.Lock()

    # --- bookkeeping -----------------------------------------------------

    def _next_request_id(self, session_id: str) -> str:
        with self._lock:
            seq = self._seq.get(session_id, 0) + 1
            self._seq[session_id] = seq
        return f"{session_id}-{seq:04d}"

    def archives(self, session_id: str) -> list[TraceArchive]:
        with self._lock:
            stored = list(self._archives.get(session_id, []))
        if not stored and self.trace_store:
            stored = self.trace_store.load_session(session_id)
        return stored

    def session_ids(self) -> list[str]:
        return self.memory.short_term.sessions()

    def _session_context(self, session_id: str) -> str:
        turns = self.memory.short_term.turns(session_id)[-SESSION_CONTEXT_TURNS:]
        if not turns:
            return ""
        lines = ["Earlier conversation:"]
        for turn in turns:
            lines.append(f"Q: {turn.question}")
            lines.append(f"A: {turn.answer}")
        return "\n".join(lines) + "\n\n"

    # --- the main entry point ---------------------------------------------

    def ask(self, request: QueryRequest) -> AskOutcome:
        request_id = self._next_request_id(request.session_id)
        started = self.clock()
        recorder = TraceRecorder()
        backend = TracingBackend(self.backend, recorder)
        context = self._session_context(request.session_id)
        runtime = RequestRuntime(
            config=self.config,
            templates=self.templates,
            backend=backend,
            index=self.index,
            reranker=self.reranker,
            memory=self.memory,
            doc_kind_map=self.doc_kind_map,
            fixed_context=context,
        )
        final = refine_loop(request, runtime)

        accepted = final.verdict is Verdict.ACCEPT
        turn = self.memory.append_turn(
            request.session_id, request.question, final.answer, accepted=accepted
        )
        if accepted and self.config.memory.promote_accepted:
            self.memory.promote(request.session_id, turn.turn)

        archive = TraceArchive(
            request_id=request_id,
            session_id=request.session_id,
            question=request.question,
            task=request.task.value,
            gold_answer=request.gold_answer,
            mc_options=list(request.mc_options) if request.mc_options else None,
            context=context,
            final=final.to_record(),
            calls=recorder.calls,
            timings={"total_ms": int((self.clock() - started) * 1000)},
        )
        with self._lock:
            self._archives.setdefault(request.session_id, []).append(archive)
        if self.trace_store:
            self.trace_store.save(archive)
        return AskOutcome(final=final, archive=archive)

    # --- replay -----------------------------------------------------------

    def replay(self, archive: TraceArchive) -> FinalAnswer:
        """Reconstruct an archived answer from the archive alone."""

        def factory(backend: Backend, archive: TraceArchive) -> RequestRuntime:
            return RequestRuntime(
                config=self.config,
                templates=self.templates,
                backend=backend,
                index=self.index,
                reranker=self.reranker,
                memory=None,
                doc_kind_map=self.doc_kind_map,
                tool_runner=_ReplayRunner(archive.final["react_trace"], self.index.embedder),
                fixed_context=archive.context,
            )

        return replay_archive(archive, factory)

    # --- corpus management --------------------------------------------------

    def ingest(self, manifest_path: str) -> dict:
        """Build a fresh index from a bundle manifest and swap it in."""
        bundle = load_bundle(manifest_path)
        index, kind_map = build_index(bundle, self.config)
        with self._lock:
            self.index = index
            self.doc_kind_map = kind_map
        return {
            "documents": len(bundle.documents),
            "kind_counts": bundle.kind_counts,
            "chunks": len(index),
            "dim": index.dim,
        }


def build_index(bundle: DocumentBundle, config: EngineConfig) -> tuple[VectorIndex, dict]:
    embedder = HashingEmbedder(config.retrieval.embed_dim, config.retrieval.embed_seed)
    index = VectorIndex(embedder, SimFn(config.retrieval.sim_fn.upper()))
    index.add_chunks(
        bundle_chunks(bundle, config.corpus.window_words, config.corpus.stride_words)
    )
    return index, doc_kinds(bundle)


def build_backend(config: EngineConfig) -> Backend:
    section = config.backend
    if section.kind == "scripted":
        table = load_fixtures(section.fixtures) if section.fixtures else {}
        return ScriptedBackend(table=table, strict=section.strict)
    token = os.environ.get(section.auth_token_env) if section.auth_token_env else None
    backend: Backend = HttpBackend(
        endpoint=section.endpoint,
        model=section.model,
        token=token,
        timeout_s=section.timeout_s,
        retries=section.retries,
        concurrency=section.concurrency,
    )
    if section.record:
        backend = RecordingBackend(backend, section.record)
    return backend


def build_engine(config: EngineConfig) -> Engine:
    """Construct a ready engine from a validated config."""
    embedder = HashingEmbedder(config.retrieval.embed_dim, config.retrieval.embed_seed)
    sim_fn = SimFn(config.retrieval.sim_fn.upper())
    doc_kind_map: dict[str, DocumentKind] = {}
    if config.corpus.index and os.path.exists(config.corpus.index):
        index = VectorIndex.load(config.corpus.index, embedder)
        doc_kind_map = {
            p.chunk.doc_id: DocumentKind(p.chunk.kind.value)
            for p in index.passages
            if p.chunk.kind.value in ("PFD", "PID")
        }
    elif config.corpus.manifest:
        bundle = load_bundle(config.corpus.manifest)
        index, doc_kind_map = build_index(bundle, config)
    else:
        index = VectorIndex(embedder, sim_fn)

    backend = build_backend(config)
    clock = zero_clock if config.backend.kind == "scripted" else time.time
    memory = MemoryStores(embedder, store_dir=config.memory.store_dir, clock=clock)
    templates = TemplateRegistry(config.selection.template_dir)
    if config.selection.k_target > 2 and config.selection.template_dir is None:
        logging.getLogger(__name__).warning(
            "k_target=%d with the default templates still asks for two candidates; "
            "override the template directory for larger candidate sets",
            config.selection.k_target,
        )
    return Engine(
        config=config,
        index=index,
        backend=backend,
        templates=templates,
        memory=memory,
        doc_kind_map=doc_kind_map,
        clock=clock,
    )
