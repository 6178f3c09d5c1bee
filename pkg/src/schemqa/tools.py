"""Tool registry for the ReAct loop.

doc_search and memory_search feed the passage pool that later gets
reranked into the reader context; web_search and wiki_search are
observation-only. The web/wiki tools run offline against fixture
snippet files keyed by normalized query, so tests never touch the
network.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Chunk, ChunkKind
from .errors import FixtureMiss, ToolNotFound
from .memory import MemoryStores, SessionTurn
from .retrieval import IndexedPassage, PassageHit, Reranker, RetrievalConfig, VectorIndex, retrieve

DOC_SEARCH = "doc_search"
MEMORY_SEARCH = "memory_search"
WEB_SEARCH = "web_search"
WIKI_SEARCH = "wiki_search"

_SNIPPET_LINE = re.compile(r"^\d+\. \[(?P<doc>[^\]#|]+)#(?P<seq>\d+)\|(?P<kind>[A-Z_]+)\] (?P<text>.*)$")
_MEMORY_LINE = re.compile(r"^\d+\. \((?:session turn \d+|stored answer [^)]*)\) (?P<text>Q: .*)$")


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    offline: bool


DEFAULT_REGISTRY: dict[str, ToolDescriptor] = {
    DOC_SEARCH: ToolDescriptor(DOC_SEARCH, "search the indexed plant documents", offline=True),
    MEMORY_SEARCH: ToolDescriptor(MEMORY_SEARCH, "recall previous question-answer turns", offline=True),
    WEB_SEARCH: ToolDescriptor(WEB_SEARCH, "search the web (offline fixture mode)", offline=True),
    WIKI_SEARCH: ToolDescriptor(WIKI_SEARCH, "look up encyclopedia articles (offline fixture mode)", offline=True),
}


@dataclass
class ToolContext:
    """Per-request state shared by tool invocations."""

    index: VectorIndex
    retrieval_config: RetrievalConfig
    reranker: Reranker
    memory: MemoryStores | None = None
    session_id: str | None = None
    doc_filter: set[str] | None = None
    fixtures_dir: Path | None = None
    strict_fixtures: bool = False
    recall_top_m: int = 4
    pool: dict[tuple[str, int], PassageHit] = field(default_factory=dict)
    doc_search_calls: int = 0

    def pool_hits(self) -> list[PassageHit]:
        return list(self.pool.values())

    def add_hit(self, hit: PassageHit) -> None:
        self.pool.setdefault(hit.chunk.key(), hit)


def stable_seq(text: str) -> int:
    """Content-derived sequence number for synthetic memory chunks, so the
    same recalled turn dedupes in the pool and survives trace replay."""
    return int.from_bytes(hashlib.sha1(text.encode("utf-8")).digest()[:4], "big") % (2**31)


def normalize_query(query: str) -> str:
    """Fixture filename slug: lowercase alphanumerics joined by underscores."""
    tokens = re.findall(r"[a-z0-9]+", query.lower())
    return "_".join(tokens) or "empty"


def render_snippets(hits: list[PassageHit]) -> str:
    return "\n".join(
        f"{i}. [{h.chunk.doc_id}#{h.chunk.seq}|{h.chunk.kind.value}] {h.chunk.text}"
        for i, h in enumerate(hits, start=1)
    )


def parse_snippets(observation: str, embedder) -> list[PassageHit]:
    """Rebuild pool hits from a doc_search observation (used by trace replay)."""
    hits: list[PassageHit] = []
    for line in observation.splitlines():
        match = _SNIPPET_LINE.match(line)
        if not match:
            continue
        text = match.group("text")
        chunk = Chunk(
            doc_id=match.group("doc"),
            seq=int(match.group("seq")),
            word_start=0,
            word_end=len(text.split()),
            text=text,
            kind=ChunkKind(match.group("kind")),
        )
        hits.append(
            PassageHit(
                passage=IndexedPassage(chunk=chunk, embedding=embedder.embed(text or "empty")),
                sim=0.0,
                prob=0.0,
            )
        )
    return hits


def parse_memory_snippets(observation: str, session_id: str | None, embedder) -> list[PassageHit]:
    """Rebuild memory pool hits from a memory_search observation (trace replay)."""
    hits: list[PassageHit] = []
    for line in observation.splitlines():
        match = _MEMORY_LINE.match(line)
        if not match:
            continue
        text = match.group("text")
        chunk = Chunk(
            doc_id=f"memory:{session_id or 'global'}",
            seq=stable_seq(text),
            word_start=0,
            word_end=len(text.split()),
            text=text,
            kind=ChunkKind.MEMORY,
        )
        hits.append(
            PassageHit(
                passage=IndexedPassage(chunk=chunk, embedding=embedder.embed(text)),
                sim=0.0,
                prob=0.0,
            )
        )
    return hits


def _doc_search(query: str, ctx: ToolContext) -> str:
    ctx.doc_search_calls += 1
    index = ctx.index.filtered(ctx.doc_filter) if ctx.doc_filter else ctx.index
    hits = retrieve(query, index, ctx.retrieval_config)
    for hit in hits:
        ctx.add_hit(hit)
    return render_snippets(hits) if hits else "no results"


def _memory_search(query: str, ctx: ToolContext) -> str:
    if ctx.memory is None:
        return "no results"
    results = ctx.memory.recall(query, ctx.recall_top_m, session_id=ctx.session_id)
    if not results:
        return "no results"
    lines = []
    for i, (record, sim) in enumerate(results, start=1):
        if isinstance(record, SessionTurn):
            label = f"session turn {record.turn}"
        else:
            label = f"stored answer {record.id}"
        text = " ".join(f"Q: {record.question} A: {record.answer}".split())
        lines.append(f"{i}. ({label}) {text}")
        chunk = Chunk(
            doc_id=f"memory:{ctx.session_id or 'global'}",
            seq=stable_seq(text),
            word_start=0,
            word_end=len(text.split()),
            text=text,
            kind=ChunkKind.MEMORY,
        )
        ctx.add_hit(
            PassageHit(
                passage=IndexedPassage(
                    chunk=chunk, embedding=ctx.index.embedder.embed(text)
                ),
                sim=float(sim),
                prob=0.0,
            )
        )
    return "\n".join(lines)


def _fixture_search(tool: str, query: str, ctx: ToolContext) -> str:
    slug = normalize_query(query)
    if ctx.fixtures_dir is not None:
        path = Path(ctx.fixtures_dir) / tool / f"{slug}.txt"
        if path.exists():
            return path.read_text(encoding="utf-8").strip()
    if ctx.strict_fixtures:
        raise FixtureMiss(f"no offline fixture for {tool} query slug {slug!r}")
    return "no results"


def call_tool(name: str, tool_input: str, ctx: ToolContext) -> str:
    """Run one registered tool and return its observation text."""
    if name == DOC_SEARCH:
        return _doc_search(tool_input, ctx)
    if name == MEMORY_SEARCH:
        return _memory_search(tool_input, ctx)
    if name in (WEB_SEARCH, WIKI_SEARCH):
        return _fixture_search(name, tool_input, ctx)
    raise ToolNotFound(f"unknown tool {name!r}")
