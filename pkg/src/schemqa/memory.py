"""Short-term session memory and long-term persistent QA memory.

Short-term memory holds per-session turns for immediate context; the
long-term store keeps accepted question-answer pairs with question
embeddings for reuse across sessions. Both are searched by the
memory_search tool.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NotAccepted, StorageFailure, UnknownTurn
from .retrieval import Embedder

SESSION_CONTEXT_TURNS = 4  # active-session turns surfaced ahead of long-term hits


@dataclass(frozen=True)
class SessionTurn:
    session_id: str
    turn: int
    question: str
    answer: str
    timestamp: int
    accepted: bool = False

    def to_record(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn": self.turn,
            "question": self.question,
            "answer": self.answer,
            "timestamp": self.timestamp,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class LongTermRecord:
    id: str
    question: str
    answer: str
    created: int

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "answer": self.answer,
            "created": self.created,
        }


class ShortTermMemory:
    """In-process per-session conversation turns; single writer per session."""

    def __init__(self, clock: Callable[[], float] = time.time) -> None:
        self._sessions: dict[str, list[SessionTurn]] = {}
        self._lock = threading.Lock()
        self._clock = clock

    def append_turn(self, session_id: str, question: str, answer: str, accepted: bool = False) -> SessionTurn:
        with self._lock:
            turns = self._sessions.setdefault(session_id, [])
            turn = SessionTurn(
                session_id=session_id,
                turn=len(turns) + 1,
                question=question,
                answer=answer,
                timestamp=int(self._clock()),
                accepted=accepted,
            )
            turns.append(turn)
            return turn

    def turns(self, session_id: str) -> list[SessionTurn]:
        with self._lock:
            return list(self._sessions.get(session_id, []))

    def get_turn(self, session_id: str, turn: int) -> SessionTurn:
        turns = self.turns(session_id)
        if not 1 <= turn <= len(turns):
            raise UnknownTurn(f"session {session_id!r} has no turn {turn}")
        return turns[turn - 1]

    def sessions(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def save(self, path: str | Path) -> None:
        with self._lock:
            turns = [t for s in sorted(self._sessions) for t in self._sessions[s]]
        _write_jsonl(path, [t.to_record() for t in turns])

    def load(self, path: str | Path) -> None:
        records = _read_jsonl(path)
        with self._lock:
            self._sessions.clear()
            for rec in records:
                self._sessions.setdefault(rec["session_id"], []).append(
                    SessionTurn(
                        session_id=rec["session_id"],
                        turn=int(rec["turn"]),
                        question=rec["question"],
                        answer=rec["answer"],
                        timestamp=int(rec["timestamp"]),
                        accepted=bool(rec.get("accepted", False)),
                    )
                )


class LongTermMemory:
    """Persistent QA records with question embeddings.

    Storage is a newline-delimited record file plus a sidecar embedding
    snapshot; appends are serialized, reads are lock-free copies.
    """

    def __init__(self, embedder: Embedder, clock: Callable[[], float] = time.time) -> None:
        self.embedder = embedder
        self._records: list[LongTermRecord] = []
        self._embeddings: list[np.ndarray] = []
        self._lock = threading.Lock()
        self._clock = clock

    def __len__(self) -> int:
        return len(self._records)

    def add(self, record_id: str, question: str, answer: str) -> LongTermRecord:
        with self._lock:
            for existing in self._records:
                if existing.id == record_id:
                    return existing
            record = LongTermRecord(
                id=record_id, question=question, answer=answer, created=int(self._clock())
            )
            self._records.append(record)
            self._embeddings.append(self.embedder.embed(question))
            return record

    def records(self) -> list[LongTermRecord]:
        with self._lock:
            return list(self._records)

    def search(self, query: str, top_m: int) -> list[tuple[LongTermRecord, float]]:
        with self._lock:
            records = list(self._records)
            embeddings = list(self._embeddings)
        if not records or top_m < 1:
            return []
        q = self.embedder.embed(query)
        q = q / max(float(np.linalg.norm(q)), 1e-12)
        sims = []
        for rec, emb in zip(records, embeddings):
            e = emb / max(float(np.linalg.norm(emb)), 1e-12)
            sims.append((rec, float(e @ q)))
        sims.sort(key=lambda t: (-t[1], t[0].id))
        return sims[:top_m]

    def save(self, store_dir: str | Path) -> None:
        store_dir = Path(store_dir)
        store_dir.mkdir(parents=True, exist_ok=True)
        with self._lock:
            records = list(self._records)
            embeddings = list(self._embeddings)
        _write_jsonl(store_dir / "long_term.jsonl", [r.to_record() for r in records])
        matrix = (
            np.stack(embeddings, axis=0)
            if embeddings
            else np.zeros((0, self.embedder.dim), dtype=np.float64)
        )
        try:
            np.save(store_dir / "long_term_embeddings.npy", matrix)
        except OSError as exc:
            raise StorageFailure(f"cannot save embeddings under {store_dir}: {exc}") from exc

    def load(self, store_dir: str | Path) -> None:
        store_dir = Path(store_dir)
        records_path = store_dir / "long_term.jsonl"
        if not records_path.exists():
            return
        records = _read_jsonl(records_path)
        try:
            matrix = np.load(store_dir / "long_term_embeddings.npy")
        except OSError as exc:
            raise StorageFailure(f"cannot load embeddings under {store_dir}: {exc}") from exc
        if len(records) != matrix.shape[0]:
            raise StorageFailure("record file and embedding snapshot are out of sync")
        with self._lock:
            self._records = [
                LongTermRecord(
                    id=r["id"], question=r["question"], answer=r["answer"], created=int(r["created"])
                )
                for r in records
            ]
            self._embeddings = [matrix[i] for i in range(matrix.shape[0])]


class MemoryStores:
    """Both memories plus the policies that tie them together."""

    def __init__(
        self,
        embedder: Embedder,
        store_dir: str | Path | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.short_term = ShortTermMemory(clock=clock)
        self.long_term = LongTermMemory(embedder, clock=clock)
        self.store_dir = Path(store_dir) if store_dir else None
        if self.store_dir:
            self.long_term.load(self.store_dir)
            sessions_path = self.store_dir / "sessions.jsonl"
            if sessions_path.exists():
                self.short_term.load(sessions_path)

    def append_turn(self, session_id: str, question: str, answer: str, accepted: bool = False) -> SessionTurn:
        turn = self.short_term.append_turn(session_id, question, answer, accepted=accepted)
        if self.store_dir:
            self.persist()
        return turn

    def recall(
        self, query: str, top_m: int, session_id: str | None = None
    ) -> list[tuple[SessionTurn | LongTermRecord, float]]:
        """Active-session turns (most recent first, capped) followed by the
        top-m long-term records by question-embedding similarity."""
        if top_m < 1:
            raise ValueError("top_m must be >= 1")
        out: list[tuple[SessionTurn | LongTermRecord, float]] = []
        if session_id:
            turns = self.short_term.turns(session_id)
            q_sim = _question_sim(self.long_term.embedder, query)
            for turn in reversed(turns[-SESSION_CONTEXT_TURNS:]):
                out.append((turn, q_sim(turn.question)))
        out.extend(self.long_term.search(query, top_m))
        return out

    def promote(self, session_id: str, turn: int) -> LongTermRecord:
        """Copy an accepted session turn into long-term memory.

        Idempotent per (session, turn); refuses turns whose answer was not
        accepted by the critique.
        """
        record = self.short_term.get_turn(session_id, turn)
        if not record.accepted:
            raise NotAccepted(f"turn {turn} of session {session_id!r} was not accepted")
        result = self.long_term.add(f"{session_id}:{turn}", record.question, record.answer)
        if self.store_dir:
            self.persist()
        return result

    def persist(self) -> None:
        if not self.store_dir:
            return
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.long_term.save(self.store_dir)
        self.short_term.save(self.store_dir / "sessions.jsonl")


def _question_sim(embedder: Embedder, query: str):
    q = embedder.embed(query)
    q = q / max(float(np.linalg.norm(q)), 1e-12)

    def sim(text: str) -> float:
        e = embedder.embed(text) if text.strip() else np.zeros_like(q)
        norm = max(float(np.linalg.norm(e)), 1e-12)
        return float((e / norm) @ q)

    return sim


def _write_jsonl(path: str | Path, records: list[dict]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise StorageFailure(f"cannot write {path}: {exc}") from exc


def _read_jsonl(path: str | Path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except OSError as exc:
        raise StorageFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StorageFailure(f"malformed store file {path}: {exc}") from exc
