from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ClassifierModel, LabeledDataset, _check_trainable, register

_CHUNK = 32


@register
@dataclass
class KNNModel(ClassifierModel):
    kind = "knn"
    display_name = "k-NN"

    X: np.ndarray = field(default=None, repr=False)
    codes: np.ndarray = field(default=None, repr=False)

    def _predict_codes(self, Q):
        k = self.params["k"]
        n_classes = len(self.classes)
        out = np.empty(len(Q), dtype=np.intp)
        for lo in range(0, len(Q), _CHUNK):
            block = Q[lo:lo + _CHUNK]
            d2 = ((block[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances keep the lower training index first
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            for r, nbrs in enumerate(nearest):
                labels = self.codes[nbrs]
                votes = np.bincount(labels, minlength=n_classes)
                tied = np.flatnonzero(votes == votes.max())
                if len(tied) == 1:
                    out[lo + r] = tied[0]
                else:
                    out[lo + r] = next(c for c in labels if c in tied)
        return out

    def _state(self):
        return {"X": self.X, "codes": self.codes}

    @classmethod
    def _from_state(cls, meta, arrays):
        return cls(tuple(meta["classes"]), meta["params"], meta["seed"], meta["scaler_id"],
                   meta["n_features"], arrays["X"], arrays["codes"])


def train_knn(dataset: LabeledDataset, k: int = 5, scaler_id: str = "") -> KNNModel:
    _check_trainable(dataset)
    if not 1 <= k <= len(dataset):
        raise ValueError(f"k={k} must be in [1, {len(dataset)}]")
    return KNNModel(dataset.classes, {"k": int(k)}, None, scaler_id, dataset.X.shape[1],
                    dataset.X.copy(), dataset.codes)
