"""Embedding, exact in-memory vector search, softmax relevance, and reranking.

The index is a deliberate brute-force scan: at corpus scale (hundreds to
thousands of chunks) exact search is cheap, testable against an oracle,
and free of recall loss. The two-stage funnel is top-N retrieval over the
whole corpus followed by top-k reranking of the retrieved subset.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Chunk
from .errors import DimMismatch, EmptyCorpus, StorageFailure

logger = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = 1


class SimFn(str, Enum):
    DOT = "DOT"
    COSINE = "COSINE"


@dataclass(frozen=True)
class RetrievalConfig:
    n_retrieve: int = 8
    k_rerank: int = 4
    sim_fn: SimFn = SimFn.COSINE

    def __post_init__(self) -> None:
        if not 1 <= self.k_rerank <= self.n_retrieve:
            raise ValueError(
                f"need 1 <= k_rerank <= n_retrieve, got {self.k_rerank}/{self.n_retrieve}"
            )


@dataclass(frozen=True)
class IndexedPassage:
    chunk: Chunk
    embedding: np.ndarray


@dataclass(frozen=True)
class PassageHit:
    passage: IndexedPassage
    sim: float
    prob: float
    rerank_score: float | None = None

    @property
    def chunk(self) -> Chunk:
        return self.passage.chunk


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Seeded feature-hashed bag of words, L2-normalized.

    Deterministic across platforms (hashing via sha1, not Python's hash)
    and order-free: permuting the words of a text leaves the vector
    unchanged.
    """

    def __init__(self, dim: int = 256, seed: int = 13) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in text.lower().split():
            digest = hashlib.sha1(f"{self.seed}|{token}".encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            # Pathological sign cancellation; fall back to a one-hot of the text.
            digest = hashlib.sha1(text.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:4], "big") % self.dim] = 1.0
            norm = 1.0
        return vec / norm


class Reranker(Protocol):
    def score(self, query: str, text: str) -> float: ...


class JaccardReranker:
    """Scripted second-stage scorer: token-set Jaccard overlap with the query."""

    def score(self, query: str, text: str) -> float:
        q = set(query.lower().split())
        t = set(text.lower().split())
        union = q | t
        if not union:
            return 0.0
        return len(q & t) / len(union)


class VectorIndex:
    """Exact brute-force vector index over chunk embeddings.

    Immutable after build; concurrent readers need no locking.
    """

    def __init__(self, embedder: Embedder, sim_fn: SimFn = SimFn.COSINE) -> None:
        self.embedder = embedder
        self.sim_fn = sim_fn
        self.dim = embedder.dim
        self.passages: list[IndexedPassage] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.passages)

    def add_chunks(self, chunks: Sequence[Chunk]) -> None:
        for chunk in chunks:
            emb = self.embedder.embed(chunk.text)
            self._check_vector(emb)
            self.passages.append(IndexedPassage(chunk=chunk, embedding=emb))
        self._matrix = None

    def add_passage(self, passage: IndexedPassage) -> None:
        self._check_vector(passage.embedding)
        self.passages.append(passage)
        self._matrix = None

    def _check_vector(self, vec: np.ndarray) -> None:
        if vec.shape != (self.dim,):
            raise DimMismatch(f"vector dim {vec.shape} does not match index dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise DimMismatch("vector has non-finite entries")

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack([p.embedding for p in self.passages], axis=0)
        return self._matrix

    def sims(self, q_emb: np.ndarray) -> np.ndarray:
        if not self.passages:
            raise EmptyCorpus("index holds no passages")
        self._check_vector(np.asarray(q_emb, dtype=np.float64))
        mat = self.matrix()
        if self.sim_fn is SimFn.COSINE:
            q = q_emb / max(float(np.linalg.norm(q_emb)), 1e-12)
            norms = np.linalg.norm(mat, axis=1)
            norms[norms < 1e-12] = 1e-12
            return (mat / norms[:, None]) @ q
        return mat @ q_emb

    def filtered(self, doc_ids: set[str]) -> "VectorIndex":
        """View restricted to passages of the given documents; falls back to
        the full index if the filter would leave nothing searchable."""
        sub = VectorIndex(self.embedder, self.sim_fn)
        sub.passages = [p for p in self.passages if p.chunk.doc_id in doc_ids]
        if not sub.passages:
            return self
        return sub

    def save(self, path: str | Path) -> None:
        meta = {
            "version": INDEX_FORMAT_VERSION,
            "dim": self.dim,
            "sim_fn": self.sim_fn.value,
            "chunks": [p.chunk.to_record() for p in self.passages],
        }
        try:
            np.savez_compressed(
                path,
                vectors=self.matrix() if self.passages else np.zeros((0, self.dim)),
                meta=np.array(json.dumps(meta, sort_keys=True)),
            )
        except OSError as exc:
            raise StorageFailure(f"cannot save index to {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path, embedder: Embedder) -> "VectorIndex":
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                vectors = data["vectors"]
        except (OSError, KeyError, ValueError) as exc:
            raise StorageFailure(f"cannot load index from {path}: {exc}") from exc
        if meta.get("version") != INDEX_FORMAT_VERSION:
            raise StorageFailure(f"unsupported index version {meta.get('version')}")
        if meta["dim"] != embedder.dim:
            raise DimMismatch(f"index dim {meta['dim']} does not match embedder dim {embedder.dim}")
        index = cls(embedder, SimFn(meta["sim_fn"]))
        for record, vec in zip(meta["chunks"], vectors):
            index.passages.append(IndexedPassage(chunk=Chunk.from_record(record), embedding=vec))
        return index


def relevance_distribution(
    q_emb: np.ndarray, passages: Sequence[IndexedPassage], sim_fn: SimFn = SimFn.COSINE
) -> list[tuple[IndexedPassage, float, float]]:
    """Similarity of each passage to the query plus its softmax probability.

    The softmax is computed max-shifted for numerical stability, which is
    mathematically identical to the plain form.
    """
    if not passages:
        raise EmptyCorpus("no passages to score")
    dims = {p.embedding.shape for p in passages}
    if dims != {q_emb.shape}:
        raise DimMismatch(f"query dim {q_emb.shape} vs passage dims {dims}")
    mat = np.stack([p.embedding for p in passages], axis=0)
    if sim_fn is SimFn.COSINE:
        q = q_emb / max(float(np.linalg.norm(q_emb)), 1e-12)
        norms = np.linalg.norm(mat, axis=1)
        norms[norms < 1e-12] = 1e-12
        sims = (mat / norms[:, None]) @ q
    else:
        sims = mat @ q_emb
    probs = softmax(sims)
    return [(p, float(s), float(pr)) for p, s, pr in zip(passages, sims, probs)]


def softmax(sims: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over a 1-D similarity vector."""
    sims = np.asarray(sims, dtype=np.float64)
    shifted = np.exp(sims - sims.max())
    return shifted / shifted.sum()


def retrieve(query: str, index: VectorIndex, config: RetrievalConfig) -> list[PassageHit]:
    """Top-N passages by similarity, ties broken by (doc_id, seq) ascending.

    Probabilities are softmax-normalized over the full corpus before
    truncation, so a hit's prob reflects its mass among all passages.
    """
    q_emb = index.embedder.embed(query)
    sims = index.sims(q_emb)
    probs = softmax(sims)
    order = sorted(
        range(len(index.passages)),
        key=lambda i: (-sims[i], index.passages[i].chunk.doc_id, index.passages[i].chunk.seq),
    )
    top = order[: min(config.n_retrieve, len(order))]
    return [
        PassageHit(passage=index.passages[i], sim=float(sims[i]), prob=float(probs[i]))
        for i in top
    ]


def rerank(
    query: str, hits: Sequence[PassageHit], k: int, reranker: Reranker
) -> list[PassageHit]:
    """Score each retrieved hit and keep the top-k by rerank score.

    The result is always a subset of the input hits; k larger than the
    hit count clamps with a warning.
    """
    if not hits:
        raise EmptyCorpus("rerank requires at least one hit")
    if k > len(hits):
        logger.warning("rerank k=%d exceeds %d hits; clamping", k, len(hits))
        k = len(hits)
    scored = [replace(hit, rerank_score=reranker.score(query, hit.chunk.text)) for hit in hits]
    scored.sort(key=lambda h: (-(h.rerank_score or 0.0), h.chunk.doc_id, h.chunk.seq))
    return scored[:k]
