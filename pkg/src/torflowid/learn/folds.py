from __future__ import annotations

import numpy as np

from .base import LabeledDataset


def stratified_folds(dataset: LabeledDataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified k-fold split.

    Each class is shuffled and dealt round-robin over the folds; the dealing
    position carries over between classes so fold sizes also stay within one
    of each other.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    y = list(dataset.y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.intp)
    cursor = 0
    for cls in dataset.classes:
        members = np.array([i for i, lab in enumerate(y) if lab == cls], dtype=np.intp)
        if len(members) < k:
            raise ValueError(f"class {cls!r} has {len(members)} members, fewer than k={k}")
        members = rng.permutation(members)
        fold_of[members] = (cursor + np.arange(len(members))) % k
        cursor = (cursor + len(members)) % k
    all_idx = np.arange(len(y))
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]
