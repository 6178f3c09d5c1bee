"""Summarized answer selection.

For one question and its reranked passages: generate K answer candidates,
write one conditional summary per candidate (a passage arguing for that
candidate from the retrieved evidence), score each summary's validity
(binary) and pairwise informativeness (round-robin tournament), then pick
the candidate whose summary has the highest combined score.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .backends import (
    CAN,
    CAN_REVISED,
    RANK,
    SUM,
    VAL,
    Backend,
    CallDigest,
    ModelRequest,
    TraceRecorder,
    TracingBackend,
)
from .errors import CandidateParseFailure
from .prompts import TemplateRegistry, render_choices, render_passages
from .retrieval import PassageHit

DEGENERATE_MIN_WORDS = 3  # summaries shorter than this cannot support anything

_MARKER = re.compile(r"\(([a-fA-F])\)")
_TRUE_FALSE = re.compile(r"^\s*(true|false)\b", re.IGNORECASE)
_RANK_TOKEN = re.compile(r"\b([012])\b")


@dataclass(frozen=True)
class AnswerCandidate:
    k: int  # 1-based index within the candidate set
    text: str

    def letter(self) -> str:
        return chr(ord("a") + self.k - 1)


@dataclass(frozen=True)
class ConditionalSummary:
    k: int
    text: str
    token_count: int

    @property
    def degenerate(self) -> bool:
        return self.token_count < DEGENERATE_MIN_WORDS

    @staticmethod
    def from_text(k: int, text: str) -> "ConditionalSummary":
        return ConditionalSummary(k=k, text=text.strip(), token_count=len(text.split()))


@dataclass
class SelectionResult:
    candidates: list[AnswerCandidate]
    summaries: list[ConditionalSummary]
    validity: list[int]
    rank: list[float]
    k_star: int  # 1-based, aligned with AnswerCandidate.k
    answer: str
    trace: list[CallDigest] = field(default_factory=list)

    def combined(self) -> list[float]:
        return [v + r for v, r in zip(self.validity, self.rank)]

    def to_record(self) -> dict:
        return {
            "candidates": [{"k": c.k, "text": c.text} for c in self.candidates],
            "summaries": [
                {"k": s.k, "text": s.text, "token_count": s.token_count} for s in self.summaries
            ],
            "validity": self.validity,
            "rank": self.rank,
            "k_star": self.k_star,
            "answer": self.answer,
            "trace": [d.to_record() for d in self.trace],
        }


def _passage_block(passages: Sequence[PassageHit]) -> str:
    return render_passages([hit.chunk.text for hit in passages])


def parse_candidates(text: str) -> list[str]:
    """Extract '(a) ..., (b) ...' answers; dedupe case-insensitively."""
    markers = list(_MARKER.finditer(text))
    raw: list[str] = []
    for match, nxt in zip(markers, markers[1:] + [None]):
        end = nxt.start() if nxt else len(text)
        raw.append(text[match.end() : end].strip().rstrip(",;").strip())
    seen: set[str] = set()
    out: list[str] = []
    for item in raw:
        if not item:
            continue
        folded = item.casefold()
        if folded in seen:
            continue
        seen.add(folded)
        out.append(item)
    return out


def generate_candidates(
    question: str,
    passages: Sequence[PassageHit],
    k_target: int,
    backend: Backend,
    templates: TemplateRegistry,
    *,
    prev_answer: str | None = None,
    feedback: str | None = None,
    iteration: int = 0,
) -> list[AnswerCandidate]:
    """Ask the model for answer candidates and parse the '(a)/(b)' markers.

    A revision (prev_answer + feedback present) switches to the updated
    candidate-generation prompt. A parse miss retries the identical
    request once before failing.
    """
    if not passages:
        raise ValueError("candidate generation needs at least one passage")
    if k_target < 1:
        raise ValueError("k_target must be >= 1")
    revised = prev_answer is not None
    kind = CAN_REVISED if revised else CAN
    values = {"question": question, "passages": _passage_block(passages)}
    if revised:
        values["prev_answer"] = prev_answer or ""
        values["feedback"] = feedback or ""
    prompt = templates.render(kind, **values)
    request = ModelRequest(
        prompt_kind=kind,
        messages=(("user", prompt),),
        key_fields=(question, f"iter={iteration}", f"tv={templates.version}"),
    )
    for attempt in range(2):
        response = backend.complete(request)
        parsed = parse_candidates(response.text)
        if parsed:
            return [
                AnswerCandidate(k=i + 1, text=text)
                for i, text in enumerate(parsed[:k_target])
            ]
    raise CandidateParseFailure(
        f"no candidates parseable from {kind} response after retry: {response.text[:120]!r}"
    )


def summarize_for(
    question: str,
    passages: Sequence[PassageHit],
    candidate: AnswerCandidate,
    all_candidates: Sequence[AnswerCandidate],
    backend: Backend,
    templates: TemplateRegistry,
    *,
    iteration: int = 0,
) -> ConditionalSummary:
    """One conditional summary arguing for the given candidate.

    An empty response is not an error; it yields a degenerate summary
    whose validity is forced to 0 downstream without a model call.
    """
    prompt = templates.render(
        SUM,
        question=question,
        choices=render_choices([c.text for c in all_candidates]),
        prediction=f"({candidate.letter()}) {candidate.text}",
        passages=_passage_block(passages),
    )
    request = ModelRequest(
        prompt_kind=SUM,
        messages=(("user", prompt),),
        key_fields=(question, f"k={candidate.k}", f"iter={iteration}", f"tv={templates.version}"),
    )
    response = backend.complete(request)
    return ConditionalSummary.from_text(candidate.k, response.text)


def validate(
    question: str,
    candidate: AnswerCandidate,
    summary: ConditionalSummary,
    backend: Backend,
    templates: TemplateRegistry,
    *,
    iteration: int = 0,
) -> int:
    """1 if the model judges the summary valid support, else 0.

    Degenerate summaries score 0 without a backend call; unparseable
    verdicts score 0 (fail-safe).
    """
    if summary.k != candidate.k:
        raise ValueError(f"summary k={summary.k} not bound to candidate k={candidate.k}")
    if summary.degenerate:
        return 0
    prompt = templates.render(
        VAL, question=question, prediction=candidate.text, summary=summary.text
    )
    request = ModelRequest(
        prompt_kind=VAL,
        messages=(("user", prompt),),
        key_fields=(question, f"k={candidate.k}", f"iter={iteration}", f"tv={templates.version}"),
    )
    response = backend.complete(request)
    match = _TRUE_FALSE.match(response.text)
    return 1 if match and match.group(1).lower() == "true" else 0


def rank_pair(
    question: str,
    summary_a: ConditionalSummary,
    summary_b: ConditionalSummary,
    backend: Backend,
    templates: TemplateRegistry,
    *,
    iteration: int = 0,
) -> float:
    """Outcome for summary_a of one pairwise comparison: 1.0, 0.0, or 0.5.

    The backend sees each unordered pair exactly once, in canonical order
    (lower candidate index as Summary 1); the reverse outcome is derived
    as the complement, so antisymmetry holds exactly.
    """
    if summary_a.k == summary_b.k:
        raise ValueError("cannot rank a summary against itself")
    first, second = (summary_a, summary_b) if summary_a.k < summary_b.k else (summary_b, summary_a)
    prompt = templates.render(
        RANK, question=question, summary_1=first.text, summary_2=second.text
    )
    request = ModelRequest(
        prompt_kind=RANK,
        messages=(("user", prompt),),
        key_fields=(
            question,
            f"pair={first.k}-{second.k}",
            f"iter={iteration}",
            f"tv={templates.version}",
        ),
    )
    response = backend.complete(request)
    match = _RANK_TOKEN.search(response.text)
    token = match.group(1) if match else "0"
    if token == "1":
        outcome_first = 1.0
    elif token == "2":
        outcome_first = 0.0
    else:
        outcome_first = 0.5
    return outcome_first if summary_a.k < summary_b.k else 1.0 - outcome_first


def aggregate_rank(
    question: str,
    summaries: Sequence[ConditionalSummary],
    backend: Backend,
    templates: TemplateRegistry,
    *,
    iteration: int = 0,
) -> list[float]:
    """Round-robin ranking score per summary: sum of its pairwise outcomes.

    Exactly K(K-1)/2 backend calls; a single summary ranks [0.0].
    """
    k = len(summaries)
    if k < 1:
        raise ValueError("aggregate_rank needs at least one summary")
    rank = [0.0] * k
    for i in range(k):
        for j in range(i + 1, k):
            outcome = rank_pair(
                question, summaries[i], summaries[j], backend, templates, iteration=iteration
            )
            rank[i] += outcome
            rank[j] += 1.0 - outcome
    return rank


def select(
    question: str,
    passages: Sequence[PassageHit],
    k_target: int,
    backend: Backend,
    templates: TemplateRegistry,
    *,
    prev_answer: str | None = None,
    feedback: str | None = None,
    iteration: int = 0,
) -> SelectionResult:
    """Full candidate -> summary -> validity -> rank -> argmax pipeline.

    The winner maximizes validity + rank of its summary; ties go to the
    smallest candidate index. Every model call lands in the result trace
    in schedule order (candidates, summaries by k, validity by k,
    ranking pairs in index order).
    """
    if isinstance(backend, TracingBackend):
        traced, recorder = backend, backend.recorder
    else:
        recorder = TraceRecorder()
        traced = TracingBackend(backend, recorder)
    mark = recorder.mark()

    candidates = generate_candidates(
        question,
        passages,
        k_target,
        traced,
        templates,
        prev_answer=prev_answer,
        feedback=feedback,
        iteration=iteration,
    )
    summaries = [
        summarize_for(
            question, passages, candidate, candidates, traced, templates, iteration=iteration
        )
        for candidate in candidates
    ]
    validity = [
        validate(question, candidate, summary, traced, templates, iteration=iteration)
        for candidate, summary in zip(candidates, summaries)
    ]
    rank = aggregate_rank(question, summaries, traced, templates, iteration=iteration)

    best_k = 1
    best_score = validity[0] + rank[0]
    for idx in range(1, len(candidates)):
        score = validity[idx] + rank[idx]
        if score > best_score:
            best_score = score
            best_k = idx + 1
    return SelectionResult(
        candidates=candidates,
        summaries=summaries,
        validity=validity,
        rank=rank,
        k_star=best_k,
        answer=candidates[best_k - 1].text,
        trace=recorder.since(mark),
    )
