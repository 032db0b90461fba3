"""One-vs-rest linear soft-margin SVM trained with Pegasos-style subgradient steps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ClassifierModel, LabeledDataset, _check_trainable, register


@register
@dataclass
class LinearSVMModel(ClassifierModel):
    kind = "svm_linear_ovr"
    display_name = "SVM (linear, OvR)"

    weights: np.ndarray = field(default=None, repr=False)  # (n_classes, d)
    bias: np.ndarray = field(default=None, repr=False)     # (n_classes,)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights.T + self.bias

    def _predict_codes(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def _state(self):
        return {"weights": self.weights, "bias": self.bias}

    @classmethod
    def _from_state(cls, meta, arrays):
        return cls(tuple(meta["classes"]), meta["params"], meta["seed"], meta["scaler_id"],
                   meta["n_features"], arrays["weights"], arrays["bias"])


def train_linear_svm_ovr(dataset: LabeledDataset, C: float = 1.0, epochs: int = 20,
                         seed: int = 0, scaler_id: str = "") -> LinearSVMModel:
    """Train one binary hinge-loss SVM per class.

    All classes share the visiting order: each epoch is a seeded permutation
    of the training set. Step t uses learning rate 1/(lam*t) with
    lam = 1/(C*n). The bias is learned as the weight of a constant input
    feature, so it is regularized along with the rest.
    """
    _check_trainable(dataset)
    if len(dataset.classes) < 2:
        raise ValueError("linear SVM needs at least two classes")
    if C <= 0 or epochs < 1:
        raise ValueError("C must be positive and epochs >= 1")
    X, codes = dataset.X, dataset.codes
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    Y = np.where(codes[:, None] == np.arange(len(dataset.classes))[None, :], 1.0, -1.0)
    lam = 1.0 / (C * n)
    W = np.zeros((len(dataset.classes), d + 1))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            x, y = Xa[i], Y[i]
            violated = y * (W @ x) < 1.0
            W *= 1.0 - 1.0 / t
            if violated.any():
                W[violated] += (eta * y[violated])[:, None] * x
    params = {"C": float(C), "epochs": int(epochs)}
    return LinearSVMModel(dataset.classes, params, int(seed), scaler_id, d,
                          W[:, :d].copy(), W[:, d].copy())
