"""The introspective agent loop.

A request is routed to the PFD or P&ID sub-agent, which runs a ReAct
loop over the tool registry to assemble its reader context, then answers
through the selection pipeline. A critique pass scores each answer
(reference metrics when a gold answer exists, a judge score always) and
drives reflect-correct cycles until the answer is accepted or the
iteration budget runs out; the best-scoring iteration wins.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .backends import JUDGE, REACT, ROUTE, Backend, ModelRequest
from .errors import SchemqaError, ToolNotFound
from .metrics import text_scores
from .prompts import TemplateRegistry, render_choices, render_passages
from .retrieval import PassageHit, rerank
from .selection import SelectionResult, select
from .tools import DOC_SEARCH, ToolContext, call_tool

logger = logging.getLogger(__name__)

TEXT_METRIC_KEYS = ("bleu2", "bleu4", "rouge1", "rouge2", "rougeL", "meteor")

# Question vocabulary that signals instrumentation/control content when the
# routing model gives no usable verdict.
PID_FALLBACK_TOKENS = frozenset(
    {
        "p&id",
        "pid",
        "instrument",
        "instrumentation",
        "controller",
        "control",
        "valve",
        "transmitter",
        "interlock",
        "alarm",
        "setpoint",
        "loop",
        "tag",
    }
)

_PID_TOKEN = re.compile(r"\bP\s*&\s*IDs?\b|\bPIDs?\b", re.IGNORECASE)
_PFD_TOKEN = re.compile(r"\bPFDs?\b", re.IGNORECASE)
_THOUGHT = re.compile(r"Thought:\s*(.*?)(?=\n\s*Action:|\Z)", re.IGNORECASE | re.DOTALL)
_ACTION = re.compile(r"Action:\s*([A-Za-z_]+)(?:\[(.*?)\])?", re.IGNORECASE)
_ACTION_INPUT = re.compile(
    r"Action Input:\s*(.*?)(?=\n\s*(?:Thought|Action|Observation):|\Z)",
    re.IGNORECASE | re.DOTALL,
)


class Task(str, Enum):
    OPEN_VQA = "OPEN_VQA"
    MC_VQA = "MC_VQA"
    CAPTION = "CAPTION"


class AgentTarget(str, Enum):
    PFD_AGENT = "PFD_AGENT"
    PID_AGENT = "PID_AGENT"


class Verdict(str, Enum):
    ACCEPT = "ACCEPT"
    REVISE = "REVISE"


@dataclass(frozen=True)
class QueryRequest:
    session_id: str
    question: str
    task: Task = Task.OPEN_VQA
    gold_answer: str | None = None
    mc_options: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if self.task is Task.MC_VQA:
            if not self.mc_options or not 2 <= len(self.mc_options) <= 6:
                raise ValueError("MC_VQA requires between 2 and 6 mc_options")

    def prompt_question(self) -> str:
        if self.task is Task.MC_VQA and self.mc_options:
            return f"{self.question} Options: {render_choices(list(self.mc_options))}"
        return self.question


@dataclass(frozen=True)
class Route:
    target: AgentTarget
    confidence: float
    rationale: str

    def to_record(self) -> dict:
        return {
            "target": self.target.value,
            "confidence": self.confidence,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class ReActStep:
    step: int
    thought: str
    action: str
    action_input: str
    observation: str

    def to_record(self) -> dict:
        return {
            "step": self.step,
            "thought": self.thought,
            "action": self.action,
            "action_input": self.action_input,
            "observation": self.observation,
        }


@dataclass
class FeedbackReport:
    scores: dict[str, float]
    verdict: Verdict
    critique_text: str

    @property
    def composite(self) -> float:
        return self.scores["composite"]

    def to_record(self) -> dict:
        return {
            "scores": self.scores,
            "verdict": self.verdict.value,
            "critique_text": self.critique_text,
        }


@dataclass
class IterationRecord:
    i: int
    answer: str
    selection: SelectionResult
    feedback: FeedbackReport

    def to_record(self) -> dict:
        return {
            "i": self.i,
            "answer": self.answer,
            "selection": self.selection.to_record(),
            "feedback": self.feedback.to_record(),
        }


@dataclass
class FinalAnswer:
    answer: str
    chosen_iteration: int
    iterations: list[IterationRecord]
    route: Route
    react_trace: list[ReActStep]

    @property
    def verdict(self) -> Verdict:
        return self.iterations[self.chosen_iteration].feedback.verdict

    @property
    def composite(self) -> float:
        return self.iterations[self.chosen_iteration].feedback.composite

    def to_record(self) -> dict:
        return {
            "answer": self.answer,
            "chosen_iteration": self.chosen_iteration,
            "verdict": self.verdict.value,
            "composite": self.composite,
            "route": self.route.to_record(),
            "react_trace": [s.to_record() for s in self.react_trace],
            "iterations": [it.to_record() for it in self.iterations],
        }


def route(question: str, backend: Backend, templates: TemplateRegistry) -> Route:
    """Pick the sub-agent for a question; never fails.

    The routing model is asked for a PFD/PID token; an unusable reply
    falls back to a keyword rule over the question at confidence 0.5.
    """
    prompt = templates.render(ROUTE, question=question)
    request = ModelRequest(
        prompt_kind=ROUTE,
        messages=(("user", prompt),),
        key_fields=(question, f"tv={templates.version}"),
    )
    response = backend.complete(request)
    pid_hit = _PID_TOKEN.search(response.text)
    pfd_hit = _PFD_TOKEN.search(response.text)
    if bool(pid_hit) != bool(pfd_hit):
        target = AgentTarget.PID_AGENT if pid_hit else AgentTarget.PFD_AGENT
        return Route(target=target, confidence=1.0, rationale=response.text.strip())
    tokens = {t.strip(".,!?:;()") for t in question.lower().split()}
    if tokens & PID_FALLBACK_TOKENS:
        return Route(AgentTarget.PID_AGENT, 0.5, "keyword fallback: instrumentation vocabulary")
    return Route(AgentTarget.PFD_AGENT, 0.5, "keyword fallback: default process-flow agent")


def _render_history(steps: Sequence[ReActStep]) -> str:
    if not steps:
        return ""
    lines = []
    for s in steps:
        lines.append(f"Thought: {s.thought}")
        lines.append(f"Action: {s.action}")
        if s.action_input:
            lines.append(f"Action Input: {s.action_input}")
        lines.append(f"Observation: {s.observation}")
    return "\n".join(lines) + "\n"


def parse_react(text: str) -> tuple[str, str, str]:
    """(thought, action, action_input) from a model step; no action means FINISH."""
    thought_match = _THOUGHT.search(text)
    thought = thought_match.group(1).strip() if thought_match else text.strip()
    action_match = _ACTION.search(text)
    if not action_match:
        return thought, "FINISH", ""
    action = action_match.group(1).strip()
    action_input = (action_match.group(2) or "").strip()
    if not action_input:
        input_match = _ACTION_INPUT.search(text)
        if input_match:
            action_input = input_match.group(1).strip()
    return thought, action, action_input


def react_solve(
    agent: AgentTarget,
    question: str,
    registry: dict,
    backend: Backend,
    max_steps: int,
    templates: TemplateRegistry,
    ctx: ToolContext,
    *,
    context_prefix: str = "",
    tool_runner=call_tool,
) -> tuple[list[PassageHit], list[ReActStep]]:
    """Run the thought/action/observation loop and rerank the passage pool.

    Unknown tools become error observations and the loop continues. If the
    model finishes without a single doc_search, a guard step forces one so
    the reader context is never empty. The pool is reranked to the
    configured width on FINISH or step-budget exhaustion.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    steps: list[ReActStep] = []
    for step_no in range(1, max_steps + 1):
        prompt = templates.render(
            REACT,
            question=question,
            context=context_prefix,
            history=_render_history(steps),
        )
        request = ModelRequest(
            prompt_kind=REACT,
            messages=(("user", prompt),),
            key_fields=(question, f"agent={agent.value}", f"step={step_no}", f"tv={templates.version}"),
        )
        response = backend.complete(request)
        thought, action, action_input = parse_react(response.text)
        if action.upper() == "FINISH":
            steps.append(ReActStep(step_no, thought, "FINISH", "", ""))
            break
        if action not in registry:
            observation = f"error: unknown tool {action!r}"
        else:
            try:
                observation = tool_runner(action, action_input, ctx)
            except ToolNotFound as exc:
                observation = f"error: {exc}"
        steps.append(ReActStep(step_no, thought, action, action_input, observation))

    if ctx.doc_search_calls == 0:
        observation = tool_runner(DOC_SEARCH, question, ctx)
        steps.append(
            ReActStep(
                step=len(steps) + 1,
                thought="no document retrieval was performed; forcing one search",
                action=DOC_SEARCH,
                action_input=question,
                observation=observation,
            )
        )

    hits = rerank(question, ctx.pool_hits(), ctx.retrieval_config.k_rerank, ctx.reranker)
    return hits, steps


def parse_judge(text: str) -> tuple[float, str]:
    """'0.8 | tight and grounded' -> (0.8, 'tight and grounded').

    Unparseable scores fall back to 0.5 with the raw text as critique.
    """
    head, _, tail = text.partition("|")
    try:
        score = float(head.strip())
    except ValueError:
        return 0.5, text.strip()
    return min(max(score, 0.0), 1.0), tail.strip()


def critique(
    question: str,
    passages: Sequence[PassageHit],
    answer: str,
    gold_answer: str | None,
    backend: Backend,
    templates: TemplateRegistry,
    *,
    tau: float = 0.8,
    iteration: int = 0,
) -> FeedbackReport:
    """Score one answer and decide ACCEPT/REVISE.

    With a gold answer the composite is the mean of the reference-metric
    mean and the judge score; without one it is the judge score alone.
    """
    if not answer.strip():
        raise ValueError("critique needs a non-empty answer")
    scores: dict[str, float] = {}
    metric_composite = None
    if gold_answer is not None and gold_answer.strip():
        scores.update(text_scores(answer, gold_answer))
        metric_composite = sum(scores[k] for k in TEXT_METRIC_KEYS) / len(TEXT_METRIC_KEYS)

    gold_line = f"Reference answer: {gold_answer}\n" if metric_composite is not None else ""
    prompt = templates.render(
        JUDGE,
        question=question,
        passages=render_passages([h.chunk.text for h in passages]),
        answer=answer,
        gold_line=gold_line,
        gold_clause=" and the reference answer" if metric_composite is not None else "",
    )
    request = ModelRequest(
        prompt_kind=JUDGE,
        messages=(("user", prompt),),
        key_fields=(question, f"iter={iteration}", f"tv={templates.version}"),
    )
    response = backend.complete(request)
    judge_score, critique_text = parse_judge(response.text)
    scores["judge"] = judge_score
    composite = (
        (metric_composite + judge_score) / 2 if metric_composite is not None else judge_score
    )
    scores["composite"] = composite
    verdict = Verdict.ACCEPT if composite >= tau else Verdict.REVISE
    return FeedbackReport(scores=scores, verdict=verdict, critique_text=critique_text)


def refine_loop(request: QueryRequest, runtime) -> FinalAnswer:
    """Route, gather context, then reflect-correct until accepted.

    Iteration 0 answers from the plain candidate prompt; later iterations
    regenerate candidates under the previous answer and its critique,
    reusing the same reader passages. The loop stops on ACCEPT or after
    max_iters corrections; the best-composite iteration (earliest on
    ties) supplies the final answer. A failed correction falls back to
    the best earlier iteration instead of aborting the request.
    """
    cfg = runtime.config
    templates = runtime.templates
    backend = runtime.backend
    question = request.prompt_question()

    chosen_route = route(question, backend, templates)
    ctx = runtime.tool_context(request, chosen_route)
    context_prefix = runtime.session_context(request.session_id)
    passages, react_trace = react_solve(
        chosen_route.target,
        question,
        runtime.registry,
        backend,
        cfg.loop.max_react_steps,
        templates,
        ctx,
        context_prefix=context_prefix,
        tool_runner=runtime.tool_runner,
    )

    iterations: list[IterationRecord] = []
    prev_answer: str | None = None
    prev_feedback: str | None = None
    for i in range(cfg.loop.max_iters + 1):
        try:
            selection = select(
                question,
                passages,
                cfg.selection.k_target,
                backend,
                templates,
                prev_answer=prev_answer,
                feedback=prev_feedback,
                iteration=i,
            )
            feedback = critique(
                question,
                passages,
                selection.answer,
                request.gold_answer,
                backend,
                templates,
                tau=cfg.loop.tau,
                iteration=i,
            )
        except SchemqaError as exc:
            if i == 0:
                raise
            logger.warning("iteration %d failed (%s); keeping best earlier answer", i, exc)
            break
        iterations.append(IterationRecord(i=i, answer=selection.answer, selection=selection, feedback=feedback))
        if feedback.verdict is Verdict.ACCEPT:
            break
        prev_answer = selection.answer
        prev_feedback = feedback.critique_text

    best = 0
    for idx in range(1, len(iterations)):
        if iterations[idx].feedback.composite > iterations[best].feedback.composite:
            best = idx
    return FinalAnswer(
        answer=iterations[best].answer,
        chosen_iteration=iterations[best].i,
        iterations=iterations,
        route=chosen_route,
        react_trace=react_trace,
    )
