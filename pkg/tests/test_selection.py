from __future__ import annotations

import random

import pytest

from schemqa.backends import CAN, RANK, SUM, VAL, ScriptedBackend
from schemqa.errors import CandidateParseFailure
from schemqa.selection import (
    AnswerCandidate,
    ConditionalSummary,
    aggregate_rank,
    generate_candidates,
    parse_candidates,
    rank_pair,
    select,
    summarize_for,
    validate,
)

from .conftest import make_hit
from .judges import make_ranker, make_validator, prediction_of, rank_pair_of, summarizer

PASSAGES = [
    make_hit("overhead vapor is condensed and collected in the reflux drum", seq=0),
    make_hit("the desalter removes salts from the crude using wash water", seq=1),
]
Q = "which vessel collects the condensed overhead vapor?"


def summary(k: int, text: str) -> ConditionalSummary:
    return ConditionalSummary.from_text(k, text)


# --- candidate parsing ---------------------------------------------------------


def test_parse_candidates_basic():
    assert parse_candidates("(a) reflux drum (b) desalter") == ["reflux drum", "desalter"]


def test_parse_candidates_with_commas():
    assert parse_candidates("(a) Answer 1, (b) Answer 2.") == ["Answer 1", "Answer 2."]


def test_parse_candidates_dedupe_case_insensitive():
    # string-normalization oracle: casefold equality keeps only the first form
    parsed = parse_candidates("(a) pump (b) Pump")
    assert parsed == ["pump"]
    assert parsed[0].casefold() == "Pump".casefold()


def test_parse_candidates_no_markers():
    assert parse_candidates("no idea") == []


def test_generate_candidates_fixture(templates):
    backend = ScriptedBackend(handlers={CAN: "(a) reflux drum (b) desalter"})
    out = generate_candidates(Q, PASSAGES, 2, backend, templates)
    assert [c.text for c in out] == ["reflux drum", "desalter"]
    assert [c.k for c in out] == [1, 2]


def test_generate_candidates_clamps_to_k_target(templates):
    backend = ScriptedBackend(handlers={CAN: "(a) one (b) two (c) three"})
    out = generate_candidates(Q, PASSAGES, 2, backend, templates)
    assert [c.text for c in out] == ["one", "two"]


def test_generate_candidates_parse_failure_after_retry(templates):
    backend = ScriptedBackend(handlers={CAN: "no idea"})
    with pytest.raises(CandidateParseFailure):
        generate_candidates(Q, PASSAGES, 2, backend, templates)
    assert backend.call_count(CAN) == 2  # retried once with the same prompt


def test_generate_candidates_revised_uses_other_prompt(templates):
    backend = ScriptedBackend(handlers={"CAN_REVISED": "(a) corrected"})
    out = generate_candidates(
        Q, PASSAGES, 2, backend, templates, prev_answer="old", feedback="be precise", iteration=1
    )
    assert out[0].text == "corrected"
    sent = backend.calls[0]
    assert sent.prompt_kind == "CAN_REVISED"
    assert "Previous answer: old" in sent.rendered()
    assert "Feedback: be precise" in sent.rendered()


# --- summaries --------------------------------------------------------------------


def test_summaries_mention_their_candidate(templates):
    backend = ScriptedBackend(handlers={SUM: summarizer})
    candidates = [AnswerCandidate(1, "reflux drum"), AnswerCandidate(2, "desalter")]
    summaries = [
        summarize_for(Q, PASSAGES, c, candidates, backend, templates) for c in candidates
    ]
    assert "reflux drum" in summaries[0].text
    assert "desalter" in summaries[1].text
    assert summaries[0].text != summaries[1].text


def test_empty_summary_is_degenerate_not_a_crash(templates):
    backend = ScriptedBackend(handlers={SUM: ""})
    out = summarize_for(
        Q, PASSAGES, AnswerCandidate(1, "x"), [AnswerCandidate(1, "x")], backend, templates
    )
    assert out.degenerate
    assert out.token_count == 0


def test_summary_determinism(templates):
    backend = ScriptedBackend(handlers={SUM: summarizer})
    candidate = AnswerCandidate(1, "reflux drum")
    first = summarize_for(Q, PASSAGES, candidate, [candidate], backend, templates)
    second = summarize_for(Q, PASSAGES, candidate, [candidate], backend, templates)
    assert first.text == second.text


def test_sum_prompt_carries_prediction(templates):
    backend = ScriptedBackend(handlers={SUM: "fine"})
    candidate = AnswerCandidate(2, "desalter")
    summarize_for(Q, PASSAGES, candidate, [AnswerCandidate(1, "drum"), candidate], backend, templates)
    assert prediction_of(backend.calls[0]) == "desalter"


# --- validity -----------------------------------------------------------------------


def test_validate_true(templates):
    backend = ScriptedBackend(handlers={VAL: "True"})
    assert validate(Q, AnswerCandidate(1, "x"), summary(1, "solid supporting text"), backend, templates) == 1


def test_validate_unparseable_is_zero(templates):
    backend = ScriptedBackend(handlers={VAL: "maybe?"})
    assert validate(Q, AnswerCandidate(1, "x"), summary(1, "solid supporting text"), backend, templates) == 0


def test_validate_degenerate_short_circuits(templates):
    backend = ScriptedBackend(handlers={VAL: "True"})
    assert validate(Q, AnswerCandidate(1, "x"), summary(1, ""), backend, templates) == 0
    assert validate(Q, AnswerCandidate(1, "x"), summary(1, "two words"), backend, templates) == 0
    assert backend.call_count() == 0


def test_validate_case_insensitive(templates):
    backend = ScriptedBackend(handlers={VAL: "  true, it is supported"})
    assert validate(Q, AnswerCandidate(1, "x"), summary(1, "three word text"), backend, templates) == 1


# --- pairwise ranking ------------------------------------------------------------------


def test_rank_pair_first_wins(templates):
    backend = ScriptedBackend(handlers={RANK: "1"})
    outcome = rank_pair(Q, summary(1, "first summary text"), summary(2, "second summary text"), backend, templates)
    assert outcome == 1.0


def test_rank_pair_tie_and_garbage(templates):
    assert rank_pair(Q, summary(1, "a a a"), summary(2, "b b b"), ScriptedBackend(handlers={RANK: "0"}), templates) == 0.5
    assert rank_pair(Q, summary(1, "a a a"), summary(2, "b b b"), ScriptedBackend(handlers={RANK: "no idea"}), templates) == 0.5


def test_rank_pair_canonical_order_and_complement(templates):
    backend = ScriptedBackend(handlers={RANK: "1"})
    s1, s2 = summary(1, "first summary text"), summary(2, "second summary text")
    forward = rank_pair(Q, s1, s2, backend, templates)
    reverse = rank_pair(Q, s2, s1, backend, templates)
    assert forward + reverse == 1.0
    # both calls rendered the pair in canonical order: lower index as Summary 1
    for call in backend.calls:
        first, _ = rank_pair_of(call)
        assert first == "first summary text"


def test_rank_pair_rejects_self(templates):
    with pytest.raises(ValueError):
        rank_pair(Q, summary(1, "x y z"), summary(1, "x y z"), ScriptedBackend(), templates)


def test_aggregate_rank_single_pair(templates):
    backend = ScriptedBackend(handlers={RANK: "1"})
    ranks = aggregate_rank(Q, [summary(1, "s one text"), summary(2, "s two text")], backend, templates)
    assert ranks == [1.0, 0.0]


def test_aggregate_rank_all_ties_k3(templates):
    # oracle: 3 pairs, each contributing 0.5 to both sides -> 1.0 each
    backend = ScriptedBackend(handlers={RANK: "0"})
    ranks = aggregate_rank(
        Q,
        [summary(1, "one text here"), summary(2, "two text here"), summary(3, "three text here")],
        backend,
        templates,
    )
    assert ranks == [1.0, 1.0, 1.0]
    assert backend.call_count(RANK) == 3


def test_aggregate_rank_k1(templates):
    assert aggregate_rank(Q, [summary(1, "only one here")], ScriptedBackend(), templates) == [0.0]


# --- select ---------------------------------------------------------------------------


def select_backend(validity=("True", "False"), rank_response="0"):
    val_iter = list(validity)

    def val_handler(request):
        return val_iter.pop(0)

    return ScriptedBackend(
        handlers={
            CAN: "(a) reflux drum (b) desalter",
            SUM: summarizer,
            VAL: val_handler,
            RANK: rank_response,
        }
    )


def test_select_worked_example(templates):
    # v=(1,0), r=(0.5,0.5) -> combined (1.5, 0.5) -> k*=1
    backend = select_backend(validity=("True", "False"), rank_response="0")
    result = select(Q, PASSAGES, 2, backend, templates)
    assert result.validity == [1, 0]
    assert result.rank == [0.5, 0.5]
    assert result.combined() == [1.5, 0.5]
    assert result.k_star == 1
    assert result.answer == "reflux drum"


def test_select_tie_break_smallest_k(templates):
    backend = select_backend(validity=("True", "True"), rank_response="0")
    result = select(Q, PASSAGES, 2, backend, templates)
    assert result.combined() == [1.5, 1.5]
    assert result.k_star == 1


def test_select_single_candidate(templates):
    backend = ScriptedBackend(
        handlers={CAN: "(a) reflux drum", SUM: summarizer, VAL: "False", RANK: "2"}
    )
    result = select(Q, PASSAGES, 1, backend, templates)
    assert result.k_star == 1
    assert result.rank == [0.0]


def test_select_budget_and_trace_schedule(templates):
    backend = select_backend()
    result = select(Q, PASSAGES, 2, backend, templates)
    # 1 candidates + K summaries + K validity + K(K-1)/2 ranking
    assert backend.call_count() == 1 + 2 + 2 + 1
    assert [d.kind for d in result.trace] == [CAN, SUM, SUM, VAL, VAL, RANK]


def test_select_degenerate_skips_validity_call(templates):
    backend = ScriptedBackend(
        handlers={CAN: "(a) drum (b) desalter", SUM: ["a full valid summary", ""], VAL: "True", RANK: "1"}
    )
    result = select(Q, PASSAGES, 2, backend, templates)
    assert result.validity == [1, 0]
    assert backend.call_count(VAL) == 1
    assert backend.call_count() == 1 + 2 + 1 + 1


def test_select_rank_conservation_randomized(templates):
    rng = random.Random(5)
    for trial in range(40):
        k = rng.randint(1, 6)
        letters = "abcdef"[:k]
        can = " ".join(f"({c}) candidate {c} {trial}" for c in letters)
        backend = ScriptedBackend(
            handlers={
                CAN: can,
                SUM: summarizer,
                VAL: make_validator(salt=str(trial)),
                RANK: make_ranker(salt=str(trial)),
            }
        )
        result = select(Q, PASSAGES, k, backend, templates)
        assert sum(result.rank) == pytest.approx(k * (k - 1) / 2)
        for r, v in zip(result.rank, result.validity):
            assert 0.0 <= r <= k - 1
            assert 0.0 <= v + r <= k


def test_select_winner_invariant_under_permutation(templates):
    # content-keyed judges: permuting candidate presentation order must not
    # change the winning text when combined scores are distinct
    base = ["the reflux drum", "the desalter", "the preheat train"]
    orders = [base, base[::-1], [base[1], base[0], base[2]]]
    winners = []
    for order in orders:
        can = " ".join(f"({c}) {text}" for c, text in zip("abc", order))
        backend = ScriptedBackend(
            handlers={CAN: can, SUM: summarizer, VAL: make_validator("3"), RANK: make_ranker("3")}
        )
        result = select(Q, PASSAGES, 3, backend, templates)
        combined = sorted(result.combined())
        assert len(set(combined)) == len(combined), "salt must give distinct scores"
        winners.append(result.answer)
    assert len(set(winners)) == 1
