"""Chunk two small plant documents, index them, and watch retrieval rank
passages by softmax relevance.

Run: python demos/01_chunking_and_retrieval.py
"""

from schemqa.corpus import DocumentKind, DocumentRecord, chunk_document
from schemqa.retrieval import (
    HashingEmbedder,
    JaccardReranker,
    RetrievalConfig,
    SimFn,
    VectorIndex,
    rerank,
    retrieve,
)

PFD_TEXT = (
    "Crude oil is pumped through the preheat train and enters the desalter, where wash "
    "water extracts dissolved salts. Desalted crude passes through the fired heater into "
    "the atmospheric tower. Overhead vapor is condensed and collected in the reflux drum, "
    "and part of the liquid returns to the tower as reflux."
)
PID_TEXT = (
    "Flow controller FIC-101 modulates the charge valve FV-101. Tower pressure controller "
    "PIC-310 vents the reflux drum to flare through PV-310. A high pressure interlock "
    "PSH-310 trips the heater."
)

doc_pfd = DocumentRecord(id="pfd", kind=DocumentKind.PFD, title="CDU flow", text=PFD_TEXT)
doc_pid = DocumentRecord(id="pid", kind=DocumentKind.PID, title="CDU controls", text=PID_TEXT)

print("== chunking (window=20 words, stride=10) ==")
chunks = []
for doc in (doc_pfd, doc_pid):
    doc_chunks = chunk_document(doc, window_words=20, stride_words=10)
    chunks.extend(doc_chunks)
    print(f"{doc.id}: {len(doc.text.split())} words -> {len(doc_chunks)} overlapping chunks")
for c in chunks[:3]:
    print(f"  [{c.doc_id}#{c.seq}] words {c.word_start}..{c.word_end}: {c.text[:60]}...")

print("\n== indexing and retrieval ==")
index = VectorIndex(HashingEmbedder(dim=256, seed=13), SimFn.COSINE)
index.add_chunks(chunks)
config = RetrievalConfig(n_retrieve=4, k_rerank=2)

query = "which vessel collects the condensed overhead vapor?"
hits = retrieve(query, index, config)
print(f"query: {query}")
for h in hits:
    print(f"  sim={h.sim:+.3f} prob={h.prob:.3f} [{h.chunk.doc_id}#{h.chunk.seq}] {h.chunk.text[:60]}...")
print(f"softmax mass over all {len(index)} chunks sums to 1; top hits keep their corpus-wide prob")

print("\n== reranking to the reader width ==")
for h in rerank(query, hits, config.k_rerank, JaccardReranker()):
    print(f"  rerank={h.rerank_score:.3f} [{h.chunk.doc_id}#{h.chunk.seq}] {h.chunk.text[:60]}...")
