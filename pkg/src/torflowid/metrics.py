"""Confusion matrices with per-class and overall (micro/macro) metrics.

Every ratio whose denominator is zero evaluates to 0; such cases are flagged
as ``degenerate`` so reports can mark them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # counts[i, j]: true class i predicted as j

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, i: int) -> int:
        return int(self.counts[i, i])

    def fp(self, i: int) -> int:
        return int(self.counts[:, i].sum() - self.counts[i, i])

    def fn(self, i: int) -> int:
        return int(self.counts[i, :].sum() - self.counts[i, i])

    def tn(self, i: int) -> int:
        return self.total - self.tp(i) - self.fp(i) - self.fn(i)

    def index(self, cls) -> int:
        try:
            return self.classes.index(cls)
        except ValueError:
            raise KeyError(f"unknown class {cls!r}") from None

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("cannot add confusion matrices over different classes")
        return ConfusionMatrix(self.classes, self.counts + other.counts)


def confusion_matrix(truths, predictions, classes) -> ConfusionMatrix:
    truths, predictions, classes = list(truths), list(predictions), tuple(classes)
    if len(truths) != len(predictions):
        raise ValueError(f"length mismatch: {len(truths)} truths vs {len(predictions)} predictions")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truths, predictions):
        if t not in index or p not in index:
            raise ValueError(f"label not in classes: {t if t not in index else p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(classes, counts)


def _ratio(num, den) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1, self.accuracy))


def per_class_metrics(cm: ConfusionMatrix, cls) -> ClassMetrics:
    i = cm.index(cls)
    tp, fp, fn, tn = cm.tp(i), cm.fp(i), cm.fn(i), cm.tn(i)
    p, d1 = _ratio(tp, tp + fp)
    r, d2 = _ratio(tp, tp + fn)
    f1, d3 = _ratio(2 * p * r, p + r)
    acc, d4 = _ratio(tp + tn, cm.total)
    return ClassMetrics(p, r, f1, acc, d1 or d2 or d3 or d4)


@dataclass(frozen=True)
class Report:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f1_mean: float  # mean of per-class F1, reported alongside
    average_accuracy: float
    error_rate: float
    per_class: dict
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "average_accuracy", "error_rate", "micro_precision", "micro_recall", "micro_f1",
            "macro_precision", "macro_recall", "macro_f1", "macro_f1_mean")}


def overall_metrics(cm: ConfusionMatrix) -> Report:
    n = len(cm.classes)
    per = {c: per_class_metrics(cm, c) for c in cm.classes}
    tp = sum(cm.tp(i) for i in range(n))
    fp = sum(cm.fp(i) for i in range(n))
    fn = sum(cm.fn(i) for i in range(n))
    micro_p, dg1 = _ratio(tp, tp + fp)
    micro_r, dg2 = _ratio(tp, tp + fn)
    micro_f1, dg3 = _ratio(2 * micro_p * micro_r, micro_p + micro_r)
    mean = (lambda xs: sum(xs) / n) if n else (lambda xs: 0.0)
    macro_p = mean([m.precision for m in per.values()])
    macro_r = mean([m.recall for m in per.values()])
    macro_f1, dg4 = _ratio(2 * macro_p * macro_r, macro_p + macro_r)
    errors = [_ratio(cm.fp(i) + cm.fn(i), cm.total)[0] for i in range(n)]
    return Report(
        micro_precision=micro_p, micro_recall=micro_r, micro_f1=micro_f1,
        macro_precision=macro_p, macro_recall=macro_r, macro_f1=macro_f1,
        macro_f1_mean=mean([m.f1 for m in per.values()]),
        average_accuracy=mean([m.accuracy for m in per.values()]),
        error_rate=mean(errors),
        per_class=per,
        degenerate=dg1 or dg2 or dg3 or dg4 or any(m.degenerate for m in per.values()),
    )
