"""Slow, obviously-correct reference implementations used to check the fast paths."""
import math
from collections import Counter


def knn_oracle(train_X, train_y, query, k):
    dists = sorted((sum((a - b) ** 2 for a, b in zip(row, query)), i) for i, row in enumerate(train_X))
    nearest = [train_y[i] for _, i in dists[:k]]
    counts = Counter(nearest)
    best = max(counts.values())
    for lab in nearest:  # nearest first, so the first tied label wins
        if counts[lab] == best:
            return lab


def metrics_oracle(counts):
    """Per-class (P, R, F1, Acc) and overall values from a list-of-lists matrix."""
    n = len(counts)
    total = sum(map(sum, counts))

    def div(a, b):
        return a / b if b else 0.0

    per = []
    TP = FP = FN = 0
    errs = []
    for i in range(n):
        tp = counts[i][i]
        fp = sum(counts[r][i] for r in range(n)) - tp
        fn = sum(counts[i]) - tp
        tn = total - tp - fp - fn
        p, r = div(tp, tp + fp), div(tp, tp + fn)
        per.append((p, r, div(2 * p * r, p + r), div(tp + tn, total)))
        errs.append(div(fp + fn, total))
        TP, FP, FN = TP + tp, FP + fp, FN + fn
    mp, mr = div(TP, TP + FP), div(TP, TP + FN)
    Mp = math.fsum(x[0] for x in per) / n
    Mr = math.fsum(x[1] for x in per) / n
    return per, {
        "micro_precision": mp, "micro_recall": mr, "micro_f1": div(2 * mp * mr, mp + mr),
        "macro_precision": Mp, "macro_recall": Mr, "macro_f1": div(2 * Mp * Mr, Mp + Mr),
        "average_accuracy": math.fsum(x[3] for x in per) / n, "error_rate": math.fsum(errs) / n,
    }
