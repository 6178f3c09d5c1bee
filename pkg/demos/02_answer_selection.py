"""The summarized answer-selection round, step by step, on a scripted model:
generate candidates, write one conditional summary per candidate, score
validity and pairwise informativeness, pick the argmax.

Run: python demos/02_answer_selection.py
"""

import numpy as np

from schemqa.backends import CAN, RANK, SUM, VAL, ScriptedBackend
from schemqa.corpus import Chunk, ChunkKind
from schemqa.prompts import TemplateRegistry
from schemqa.retrieval import IndexedPassage, PassageHit
from schemqa.selection import select

QUESTION = "which vessel collects the condensed overhead vapor?"

def hit(text: str, seq: int) -> PassageHit:
    chunk = Chunk(doc_id="pfd", seq=seq, word_start=0, word_end=len(text.split()), text=text, kind=ChunkKind.PFD)
    return PassageHit(passage=IndexedPassage(chunk=chunk, embedding=np.zeros(4)), sim=0.9 - seq / 10, prob=0.5)

PASSAGES = [
    hit("overhead vapor is condensed and collected in the reflux drum", 0),
    hit("the desalter removes salts from the crude using wash water", 1),
]

# A scripted model: candidate generation, per-candidate summaries keyed on the
# prediction, a validity verdict per summary, and one pairwise ranking call.
def scripted_summary(request):
    prediction_line = request.rendered().split("Prediction", 1)[1].splitlines()[0]
    if "reflux drum" in prediction_line:
        return ("The passages state the condensed overhead is collected in the reflux drum, "
                "which also supplies the tower reflux.")
    return "The desalter treats the crude feed; nothing in the passages links it to overhead vapor."

backend = ScriptedBackend(
    handlers={
        CAN: "(a) the reflux drum (b) the desalter",
        SUM: scripted_summary,
        VAL: ["True", "False"],  # consumed in candidate order
        RANK: "1",
    }
)

result = select(QUESTION, PASSAGES, k_target=2, backend=backend, templates=TemplateRegistry())

print(f"question: {QUESTION}\n")
for cand, summary, v, r in zip(result.candidates, result.summaries, result.validity, result.rank):
    print(f"candidate ({cand.letter()}) {cand.text}")
    print(f"  summary : {summary.text}")
    print(f"  validity={v}  rank={r}  combined={v + r}")
print(f"\nargmax -> k*={result.k_star}: {result.answer!r}")
print(f"backend calls: {backend.call_count()} "
      f"(1 candidates + K summaries + K validity + K(K-1)/2 rankings for K=2)")
print(f"trace records every call in schedule order: {[d.kind for d in result.trace]}")
