from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..features import N_FEATURES, FeatureVector

MODEL_FORMAT_VERSION = 1


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: list
    classes: tuple = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.y), -1)
        if not self.classes:
            self.classes = tuple(sorted(set(self.y)))
        self.classes = tuple(self.classes)
        unknown = set(self.y) - set(self.classes)
        if unknown:
            raise ValueError(f"labels not in classes: {sorted(unknown)}")

    @classmethod
    def from_vectors(cls, vectors, classes=()):
        vectors = list(vectors)
        X = np.vstack([v.values for v in vectors]) if vectors else np.empty((0, N_FEATURES))
        return cls(X, [v.label for v in vectors], classes)

    def __len__(self):
        return len(self.y)

    @property
    def codes(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.classes)}
        return np.array([index[lab] for lab in self.y], dtype=np.intp)

    def take(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], [self.y[i] for i in idx], self.classes)


@dataclass
class ClassifierModel:
    """Shared surface of the trained classifiers.

    Subclasses implement ``_predict_codes`` and the state (de)serialization
    hooks; everything else (label mapping, dimension checks, file format)
    lives here.
    """

    kind = "abstract"
    display_name = "abstract"

    classes: tuple
    params: dict
    seed: int | None = None
    scaler_id: str = ""
    n_features: int = N_FEATURES

    def predict_many(self, X) -> list:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"dimension mismatch: model expects {self.n_features}, got {X.shape[1]}")
        return [self.classes[i] for i in self._predict_codes(X)]

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_state(cls, meta: dict, arrays) -> "ClassifierModel":
        raise NotImplementedError

    def save(self, path) -> None:
        meta = {
            "format": MODEL_FORMAT_VERSION, "kind": self.kind, "params": self.params,
            "seed": self.seed, "classes": list(self.classes), "scaler_id": self.scaler_id,
            "n_features": self.n_features,
        }
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **self._state())


_REGISTRY: dict[str, type] = {}


def register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


def load_model(path) -> ClassifierModel:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != MODEL_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format {meta.get('format')!r}")
        cls = _REGISTRY.get(meta["kind"])
        if cls is None:
            raise ValueError(f"{path}: unknown model kind {meta['kind']!r}")
        arrays = {k: data[k] for k in data.files if k != "meta"}
    return cls._from_state(meta, arrays)


def predict(model: ClassifierModel, v) -> str:
    """Classify one standardized vector; always returns a member of ``model.classes``."""
    values = v.values if isinstance(v, FeatureVector) else v
    return model.predict_many(np.asarray(values, dtype=float)[None, :])[0]


def _check_trainable(dataset: LabeledDataset):
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")

