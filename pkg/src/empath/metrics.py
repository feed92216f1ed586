"""Identification and rationale-extraction metrics plus Cohen's kappa.

Accuracy and macro-F1 for the 3-level task; micro token-F1 and IOU-F1
(threshold 0.5, greedy one-to-one span matching) for rationales.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEVEL_CLASSES = (0, 1, 2)


class MetricError(ValueError):
    pass


def accuracy(pred, gold) -> float:
    pred, gold = list(pred), list(gold)
    if len(pred) != len(gold):
        raise MetricError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise MetricError("accuracy undefined on empty input")
    return sum(p == g for p, g in zip(pred, gold)) / len(pred)


def per_class_f1(pred, gold, classes=LEVEL_CLASSES) -> list:
    pred, gold = list(pred), list(gold)
    if len(pred) != len(gold):
        raise MetricError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise MetricError("f1 undefined on empty input")
    scores = []
    for c in classes:
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp = sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn = sum(1 for p, g in zip(pred, gold) if p != c and g == c)
        scores.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return scores


def macro_f1(pred, gold, classes=LEVEL_CLASSES) -> float:
    """Unweighted mean over all classes regardless of support."""
    scores = per_class_f1(pred, gold, classes)
    return sum(scores) / len(scores)


def token_f1(pred_masks, gold_masks) -> float:
    """Micro-averaged binary F1 of the rationale class over the whole corpus.

    Both sides all-negative counts as 1.0 (vacuous perfection).
    """
    tp = fp = fn = 0
    for pm, gm in zip(pred_masks, gold_masks):
        pm, gm = list(pm), list(gm)
        if len(pm) != len(gm):
            raise MetricError(f"mask length mismatch: {len(pm)} vs {len(gm)}")
        for p, g in zip(pm, gm):
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif g and not p:
                fn += 1
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def extract_spans(mask) -> list:
    """Maximal contiguous runs of 1 as half-open token intervals."""
    spans = []
    start = None
    for j, m in enumerate(list(mask) + [0]):
        if m and start is None:
            start = j
        elif not m and start is not None:
            spans.append((start, j))
            start = None
    return spans


def _iou(a, b) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union else 0.0


def iou_counts(pred_spans_per_example, gold_spans_per_example, threshold: float = 0.5):
    """(tp, fp, fn) under greedy descending-IOU one-to-one matching per example."""
    tp = fp = fn = 0
    for pred_spans, gold_spans in zip(pred_spans_per_example, gold_spans_per_example):
        pairs = sorted(
            (
                (_iou(p, g), pi, gi)
                for pi, p in enumerate(pred_spans)
                for gi, g in enumerate(gold_spans)
            ),
            key=lambda t: (-t[0], t[1], t[2]),
        )
        used_p, used_g = set(), set()
        matched = 0
        for iou, pi, gi in pairs:
            if iou < threshold:
                break
            if pi in used_p or gi in used_g:
                continue
            used_p.add(pi)
            used_g.add(gi)
            matched += 1
        tp += matched
        fp += len(pred_spans) - matched
        fn += len(gold_spans) - matched
    return tp, fp, fn


def iou_f1(pred_spans_per_example, gold_spans_per_example, threshold: float = 0.5) -> float:
    tp, fp, fn = iou_counts(pred_spans_per_example, gold_spans_per_example, threshold)
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def cohen_kappa(labels_a, labels_b) -> float:
    a, b = list(labels_a), list(labels_b)
    if len(a) != len(b):
        raise MetricError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise MetricError("kappa needs at least 2 items")
    labels = sorted(set(a) | set(b))
    if len(labels) < 2:
        raise MetricError("kappa undefined with fewer than 2 distinct labels")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in labels)
    if p_e >= 1.0:
        raise MetricError("kappa undefined: chance agreement is 1")
    return (p_o - p_e) / (1 - p_e)


@dataclass
class MetricReport:
    accuracy: float
    macro_f1: float
    per_class_f1: list
    token_f1: float
    iou_f1: float
    support: dict = field(default_factory=dict)  # class -> count
    span_counts: dict = field(default_factory=dict)  # tp/fp/fn

    def to_text(self) -> str:
        lines = [
            f"accuracy = {self.accuracy:.4f}",
            f"macro_f1 = {self.macro_f1:.4f}",
        ]
        for c, f1 in zip(LEVEL_CLASSES, self.per_class_f1):
            lines.append(f"f1_class_{c} = {f1:.4f}")
        lines.append(f"token_f1 = {self.token_f1:.4f}")
        lines.append(f"iou_f1 = {self.iou_f1:.4f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": list(self.per_class_f1),
            "token_f1": self.token_f1,
            "iou_f1": self.iou_f1,
            "support": dict(self.support),
            "span_counts": dict(self.span_counts),
        }


def report_from_labels(pred_levels, gold_levels, pred_masks, gold_masks) -> MetricReport:
    pred_spans = [extract_spans(m) for m in pred_masks]
    gold_spans = [extract_spans(m) for m in gold_masks]
    support = {c: sum(1 for g in gold_levels if g == c) for c in LEVEL_CLASSES}
    tp, fp, fn = iou_counts(pred_spans, gold_spans)
    return MetricReport(
        accuracy=accuracy(pred_levels, gold_levels),
        macro_f1=macro_f1(pred_levels, gold_levels),
        per_class_f1=per_class_f1(pred_levels, gold_levels),
        token_f1=token_f1(pred_masks, gold_masks),
        iou_f1=iou_f1(pred_spans, gold_spans),
        support=support,
        span_counts={"tp": tp, "fp": fp, "fn": fn},
    )


def evaluate(model, pairs, vocab, max_len: int = 64) -> MetricReport:
    """Run the model in eval mode over annotated pairs and assemble a report."""
    from .model import predict
    from .text import encode_pair

    pred_levels, gold_levels, pred_masks, gold_masks = [], [], [], []
    for pair in pairs:
        enc = encode_pair(pair, vocab, max_len)
        p = predict(enc, model)
        pred_levels.append(p.level)
        gold_levels.append(pair.levels[model.mechanism])
        pred_masks.append(p.rationale_mask)
        gold_masks.append(enc.rationale_mask[model.mechanism])
    return report_from_labels(pred_levels, gold_levels, pred_masks, gold_masks)
