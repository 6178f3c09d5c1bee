"""The evaluation metric suite on small worked examples, then a mixed-task
dataset scored through the offline eval runner.

Run: python demos/04_eval_metrics.py
"""

from schemqa.metrics import (
    BBox,
    TextPair,
    bleu_n,
    detection_scores,
    edit_rates,
    evaluate_records,
    iou,
    meteor_lite,
    render_table,
    rouge_l,
    rouge_n,
)

pair = TextPair("the cat sat", "the cat sat on the mat")
print("candidate:", pair.candidate, "| reference:", pair.reference)
print(f"  BLEU-2     = {bleu_n(pair, 2):.6f}   (clipped precisions 1.0, 1.0; brevity e^-1)")
print(f"  ROUGE-1 F1 = {rouge_n(pair, 1)[2]:.4f}")
print(f"  ROUGE-L F1 = {rouge_l(pair)[2]:.4f}")
print(f"  METEOR     = {meteor_lite(pair):.4f}")

cer, wer = edit_rates(TextPair("kitten", "sitting"))
print(f"\nedit rates kitten vs sitting: CER={cer:.4f} (3 edits / 7 chars)")

a, b = BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)
print(f"IoU of overlapping unit boxes: {iou(a, b):.4f} (intersection 2 / union 6)")
det = detection_scores([a], [b], iou_threshold=0.3)
print(f"detection at threshold 0.3: P={det.precision} R={det.recall} mean IoU={det.mean_iou:.3f}")

records = [
    {"id": 1, "task": "CAPTION", "prediction": "crude unit flow diagram", "gold": "crude distillation unit flow diagram"},
    {"id": 2, "task": "MC_VQA", "prediction": "B", "gold": "B"},
    {"id": 3, "task": "MC_VQA", "prediction": "A", "gold": "C"},
    {"id": 4, "task": "OCR", "prediction": "FIC-101", "gold": "FIC-101 loop"},
    {"id": 5, "task": "DETECTION", "pred_boxes": [[0, 0, 4, 4]], "gold_boxes": [[1, 1, 5, 5]]},
]
print("\n== offline eval runner ==")
print(render_table(evaluate_records(records)))
