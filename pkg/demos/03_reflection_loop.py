"""A full engine request with the reflect-correct loop: the first answer is
rejected by the critique, the candidate prompt is revised with the
feedback, and the second answer is accepted.

Run: python demos/03_reflection_loop.py
"""

import json
import tempfile
from pathlib import Path

from schemqa.backends import CAN, CAN_REVISED, JUDGE, RANK, REACT, ROUTE, SUM, VAL, ScriptedBackend
from schemqa.config import load_config
from schemqa.engine import build_engine
from schemqa.orchestrator import QueryRequest

PFD_TEXT = (
    "Preheated crude enters the desalter, where wash water extracts dissolved salts and "
    "entrained solids before they reach the exchangers. Desalted crude flows through the "
    "fired heater into the atmospheric tower, which separates it into naphtha, kerosene, "
    "gas oil and residue."
)

workdir = Path(tempfile.mkdtemp(prefix="schemqa-demo-"))
(workdir / "pfd.txt").write_text(PFD_TEXT)
(workdir / "manifest.json").write_text(
    json.dumps({"documents": [{"id": "pfd", "kind": "PFD", "title": "CDU", "text_file": "pfd.txt"}]})
)

config = load_config(
    None,
    env={},
    overrides={
        "corpus": {"manifest": str(workdir / "manifest.json"), "window_words": 25, "stride_words": 12},
        "retrieval": {"n_retrieve": 3, "k_rerank": 2},
        "loop": {"max_iters": 2, "tau": 0.8},
    },
)
engine = build_engine(config)

def scripted_summary(request):
    return "the cited passages support " + request.rendered().split("Prediction", 1)[1][:60]

engine.backend = ScriptedBackend(
    handlers={
        ROUTE: "PFD",
        REACT: ["Thought: look up desalting\nAction: doc_search\nAction Input: desalter salts",
                "Thought: enough evidence\nAction: FINISH"],
        CAN: "(a) the desalter (b) the fired heater",
        CAN_REVISED: "(a) the desalter, using wash water extraction (b) the desalter vessel",
        SUM: scripted_summary,
        VAL: "True",
        RANK: "1",
        JUDGE: ["0.45 | right vessel, but say how the salts are removed",
                "0.9 | now states the wash water mechanism"],
    }
)
engine.clock = lambda: 0.0

outcome = engine.ask(
    QueryRequest(session_id="demo", question="What removes salts from the crude feed?")
)

print(f"route: {outcome.final.route.target.value} (confidence {outcome.final.route.confidence})")
print("react trace:")
for step in outcome.final.react_trace:
    print(f"  step {step.step}: {step.action} {step.action_input!r}")
print("\niteration timeline:")
for it in outcome.final.iterations:
    fb = it.feedback
    print(f"  i={it.i}: answer={it.answer!r}")
    print(f"        composite={fb.composite:.2f} verdict={fb.verdict.value} critique={fb.critique_text!r}")
print(f"\nchosen iteration: {outcome.final.chosen_iteration}")
print(f"final answer: {outcome.final.answer!r}")
print(f"archived backend calls: {[c.kind for c in outcome.archive.calls]}")
replayed = engine.replay(outcome.archive)
print(f"replay from the archive reproduces the answer: {replayed.to_record() == outcome.archive.final}")
