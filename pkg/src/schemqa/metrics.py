"""Reference implementations of the evaluation metric suite.

Text metrics share one tokenizer (lowercase + whitespace split). METEOR is
the dependency-free exact-match variant ("METEOR-lite": greedy unigram
alignment, no stemming or synonyms) and is NOT score-comparable with
WordNet METEOR. Detection matching is greedy by IoU, not Hungarian.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import EmptyReference, InvalidBox, LengthMismatch, MalformedManifest

BLEU_EPSILON = 1e-9

# Tasks understood by the eval runner and the metric set each one gets.
TEXT_METRIC_NAMES = ("bleu2", "bleu4", "rouge1", "rouge2", "rougeL", "meteor")
TASK_METRICS = {
    "CAPTION": TEXT_METRIC_NAMES,
    "OPEN_VQA": TEXT_METRIC_NAMES,
    "MC_VQA": ("exact_match", "precision", "recall", "f1"),
    "OCR": ("cer", "wer"),
    "DETECTION": ("precision", "recall", "f1", "mean_iou"),
}


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def normalize(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass(frozen=True)
class TextPair:
    """A candidate/reference pair scored under one shared tokenization."""

    candidate: str
    reference: str

    def candidate_tokens(self) -> list[str]:
        return tokenize(self.candidate)

    def reference_tokens(self) -> list[str]:
        return tokenize(self.reference)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(pair: TextPair, n: int = 4) -> float:
    """BLEU with clipped n-gram precisions for orders 1..n.

    Score = geometric mean of modified precisions x brevity penalty
    exp(min(0, 1 - ref_len/cand_len)). Zero precisions (including orders
    the candidate is too short for) are epsilon-smoothed so short
    captions do not collapse to exactly 0.
    """
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    cand = pair.candidate_tokens()
    ref = pair.reference_tokens()
    if not ref:
        raise EmptyReference("BLEU needs a non-empty reference")
    if not cand:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        cand_ngrams = _ngrams(cand, order)
        total = sum(cand_ngrams.values())
        if total == 0:
            precision = BLEU_EPSILON
        else:
            ref_ngrams = _ngrams(ref, order)
            clipped = sum(min(count, ref_ngrams[gram]) for gram, count in cand_ngrams.items())
            precision = clipped / total if clipped else BLEU_EPSILON
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / n)
    brevity = math.exp(min(0.0, 1.0 - len(ref) / len(cand)))
    return geo_mean * brevity


def rouge_n(pair: TextPair, n: int = 1) -> tuple[float, float, float]:
    """N-gram multiset overlap as (precision, recall, f1)."""
    cand_ngrams = _ngrams(pair.candidate_tokens(), n)
    ref_ngrams = _ngrams(pair.reference_tokens(), n)
    overlap = sum((cand_ngrams & ref_ngrams).values())
    p = overlap / sum(cand_ngrams.values()) if cand_ngrams else 0.0
    r = overlap / sum(ref_ngrams.values()) if ref_ngrams else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return (p, r, f1)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Two-row DP over token sequences.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(pair: TextPair) -> tuple[float, float, float]:
    """Longest-common-subsequence overlap as (precision, recall, f1)."""
    cand = pair.candidate_tokens()
    ref = pair.reference_tokens()
    lcs = _lcs_length(cand, ref)
    p = lcs / len(cand) if cand else 0.0
    r = lcs / len(ref) if ref else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return (p, r, f1)


def _greedy_alignment(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Match candidate tokens left-to-right to the first unused identical
    reference token; each token participates in at most one match."""
    used = [False] * len(ref)
    matches: list[tuple[int, int]] = []
    for i, token in enumerate(cand):
        for j, ref_token in enumerate(ref):
            if not used[j] and ref_token == token:
                used[j] = True
                matches.append((i, j))
                break
    return matches


def meteor_lite(pair: TextPair) -> float:
    """Exact-match METEOR: F_mean = 10PR/(R+9P) with a fragmentation penalty.

    chunks counts maximal runs of matches contiguous in both strings;
    penalty = 0.5 * (chunks/matches)^3; score = F_mean * (1 - penalty).
    No matches yields 0.
    """
    cand = pair.candidate_tokens()
    ref = pair.reference_tokens()
    matches = _greedy_alignment(cand, ref)
    m = len(matches)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    f_mean = 10 * p * r / (r + 9 * p)
    chunks = 1
    for (ci, ri), (cj, rj) in zip(matches, matches[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


class McScores(NamedTuple):
    precision: float
    recall: float
    f1: float
    exact_match: float


def exact_match(predictions: Sequence[str], golds: Sequence[str]) -> float:
    """Fraction of pairs equal after tokenizer normalization."""
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        return 0.0
    hits = sum(1 for p, g in zip(predictions, golds) if normalize(p) == normalize(g))
    return hits / len(golds)


def mc_scores(predictions: Sequence[str], golds: Sequence[str]) -> McScores:
    """Multiple-choice answer scores.

    Precision/recall/F1 are macro-averaged over the option labels'
    confusion counts (union of observed gold and predicted labels,
    0 for 0/0 denominators); exact match is the normalized-equality rate.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    em = exact_match(predictions, golds)
    preds = [normalize(p) for p in predictions]
    refs = [normalize(g) for g in golds]
    labels = sorted(set(preds) | set(refs))
    if not labels:
        return McScores(0.0, 0.0, 0.0, em)
    p_sum = r_sum = f_sum = 0.0
    for label in labels:
        tp = sum(1 for p, g in zip(preds, refs) if p == label and g == label)
        fp = sum(1 for p, g in zip(preds, refs) if p == label and g != label)
        fn = sum(1 for p, g in zip(preds, refs) if p != label and g == label)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f_sum += 2 * p * r / (p + r) if p + r > 0 else 0.0
        p_sum += p
        r_sum += r
    k = len(labels)
    return McScores(p_sum / k, r_sum / k, f_sum / k, em)


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cost = 0 if x == y else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def edit_rates(pair: TextPair) -> tuple[float, float]:
    """(CER, WER): char- and word-level edit distance over reference length."""
    ref_norm = normalize(pair.reference)
    cand_norm = normalize(pair.candidate)
    if not ref_norm:
        raise EmptyReference("edit rates need a non-empty reference")
    cer = levenshtein(cand_norm, ref_norm) / len(ref_norm)
    ref_words = ref_norm.split()
    wer = levenshtein(cand_norm.split(), ref_words) / len(ref_words)
    return (cer, wer)


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidBox(f"degenerate box ({self.x1},{self.y1},{self.x2},{self.y2})")

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; disjoint boxes score 0."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area() + b.area() - inter)


class DetectionScores(NamedTuple):
    precision: float
    recall: float
    f1: float
    mean_iou: float


def detection_scores(
    pred_boxes: Sequence[BBox], gold_boxes: Sequence[BBox], iou_threshold: float = 0.5
) -> DetectionScores:
    """Greedy one-to-one box matching in descending IoU order.

    True positives are matched pairs with IoU >= threshold; mean_iou
    averages over matched pairs. Empty predictions against non-empty gold
    score 0 across the board by convention; two empty sets score
    (1, 1, 1, 0.0) vacuously.
    """
    if not pred_boxes and not gold_boxes:
        return DetectionScores(1.0, 1.0, 1.0, 0.0)
    if not pred_boxes or not gold_boxes:
        return DetectionScores(0.0, 0.0, 0.0, 0.0)
    candidates = sorted(
        (
            (iou(p, g), pi, gi)
            for pi, p in enumerate(pred_boxes)
            for gi, g in enumerate(gold_boxes)
        ),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    pred_used = [False] * len(pred_boxes)
    gold_used = [False] * len(gold_boxes)
    matched: list[float] = []
    for score, pi, gi in candidates:
        if score < iou_threshold:
            break
        if pred_used[pi] or gold_used[gi]:
            continue
        pred_used[pi] = True
        gold_used[gi] = True
        matched.append(score)
    tp = len(matched)
    precision = tp / len(pred_boxes)
    recall = tp / len(gold_boxes)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    mean_iou = sum(matched) / tp if tp else 0.0
    return DetectionScores(precision, recall, f1, mean_iou)


def text_scores(candidate: str, reference: str) -> dict[str, float]:
    """The caption/VQA metric block used by the critique agent and eval runner."""
    pair = TextPair(candidate, reference)
    return {
        "bleu2": bleu_n(pair, 2),
        "bleu4": bleu_n(pair, 4),
        "rouge1": rouge_n(pair, 1)[2],
        "rouge2": rouge_n(pair, 2)[2],
        "rougeL": rouge_l(pair)[2],
        "meteor": meteor_lite(pair),
    }


# --- offline eval runner ----------------------------------------------------


@dataclass
class MetricReport:
    """Per-item scores plus corpus means, grouped by task."""

    items: list[dict]
    corpus: dict[str, dict[str, float]]
    count: int

    def to_record(self) -> dict:
        return {"items": self.items, "corpus": self.corpus, "count": self.count}


def _boxes(raw: list) -> list[BBox]:
    return [BBox(*map(float, box)) for box in raw]


def evaluate_records(records: Sequence[dict]) -> MetricReport:
    """Score newline-delimited eval records.

    Each record is ``{id, task, prediction, gold, pred_boxes?, gold_boxes?}``
    with task one of CAPTION, OPEN_VQA, MC_VQA, OCR, DETECTION; boxes are
    [x1, y1, x2, y2] lists for the DETECTION task.
    """
    items: list[dict] = []
    by_task: dict[str, list[dict]] = {}
    for rec in records:
        task = str(rec.get("task", "")).upper()
        if task not in TASK_METRICS:
            raise MalformedManifest(f"unknown eval task {task!r} in record {rec.get('id')!r}")
        scores: dict[str, float]
        if task in ("CAPTION", "OPEN_VQA"):
            scores = text_scores(str(rec.get("prediction", "")), str(rec.get("gold", "")))
        elif task == "MC_VQA":
            scores = {
                "exact_match": exact_match([str(rec.get("prediction", ""))], [str(rec.get("gold", ""))])
            }
        elif task == "OCR":
            cer, wer = edit_rates(TextPair(str(rec.get("prediction", "")), str(rec.get("gold", ""))))
            scores = {"cer": cer, "wer": wer}
        else:  # DETECTION
            det = detection_scores(_boxes(rec.get("pred_boxes", [])), _boxes(rec.get("gold_boxes", [])))
            scores = {
                "precision": det.precision,
                "recall": det.recall,
                "f1": det.f1,
                "mean_iou": det.mean_iou,
            }
        item = {"id": rec.get("id"), "task": task, "scores": scores}
        items.append(item)
        by_task.setdefault(task, []).append(rec)

    corpus: dict[str, dict[str, float]] = {}
    for task, recs in sorted(by_task.items()):
        task_items = [it for it in items if it["task"] == task]
        if task == "MC_VQA":
            mc = mc_scores(
                [str(r.get("prediction", "")) for r in recs],
                [str(r.get("gold", "")) for r in recs],
            )
            corpus[task] = {
                "exact_match": mc.exact_match,
                "precision": mc.precision,
                "recall": mc.recall,
                "f1": mc.f1,
            }
        else:
            names = TASK_METRICS[task]
            corpus[task] = {
                name: sum(it["scores"][name] for it in task_items) / len(task_items)
                for name in names
            }
    return MetricReport(items=items, corpus=corpus, count=len(items))


def load_eval_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def render_table(report: MetricReport) -> str:
    """Aligned plain-text table: one row per task, one column per metric."""
    lines = []
    for task, means in sorted(report.corpus.items()):
        names = list(TASK_METRICS[task])
        header = ["task"] + names
        row = [task] + [f"{means[name]:.4f}" for name in names]
        widths = [max(len(h), len(v)) for h, v in zip(header, row)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
        lines.append("")
    lines.append(f"items scored: {report.count}")
    return "\n".join(lines)
