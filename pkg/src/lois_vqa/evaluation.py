"""Consensus VQA accuracy and per-answer-type breakdowns."""

import math
from dataclasses import dataclass

QTYPES = ("yesno", "number", "other")


@dataclass
class AnnotatedAnswer:
    predicted: str
    human_counts: dict
    qtype: str = "other"

    def __post_init__(self):
        if self.qtype not in QTYPES:
            raise ValueError(f"unknown question type {self.qtype!r}")
        if any(c < 0 for c in self.human_counts.values()):
            raise ValueError("annotator counts must be >= 0")
        if sum(self.human_counts.values()) > 10:
            raise ValueError("more than 10 annotators")


def vqa_accuracy(pred, human_counts):
    """min(#annotators who gave ``pred`` / 3, 1)."""
    return min(human_counts.get(pred, 0) / 3.0, 1.0)


def breakdown(results):
    """Mean accuracy per question type plus ``overall``; absent types are omitted."""
    groups = {}
    for r in results:
        acc = vqa_accuracy(r.predicted, r.human_counts)
        groups.setdefault(r.qtype, []).append(acc)
        groups.setdefault("overall", []).append(acc)
    # fsum is exactly rounded, so the means do not depend on result order
    return {k: math.fsum(groups[k]) / len(groups[k]) for k in (*QTYPES, "overall") if k in groups}
