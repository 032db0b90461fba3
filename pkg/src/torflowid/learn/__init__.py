"""Classifiers over standardized feature vectors and fold splitting."""
from .base import ClassifierModel, LabeledDataset, load_model, predict
from .folds import stratified_folds
from .forest import ForestModel, train_random_forest
from .knn import KNNModel, train_knn
from .svm import LinearSVMModel, train_linear_svm_ovr

CLASSIFIERS = ("random_forest", "knn", "svm_linear_ovr")

DISPLAY_NAMES = {
    "random_forest": ForestModel.display_name,
    "knn": KNNModel.display_name,
    "svm_linear_ovr": LinearSVMModel.display_name,
}

DEFAULT_PARAMS = {
    "random_forest": {"trees": 100, "max_depth": None},
    "knn": {"k": 5},
    "svm_linear_ovr": {"C": 1.0, "epochs": 20},
}


def train(kind: str, dataset: LabeledDataset, params: dict | None = None, seed: int = 0,
          scaler_id: str = "") -> ClassifierModel:
    """Dispatch to a trainer by classifier name, filling in default parameters."""
    p = {**DEFAULT_PARAMS[kind], **(params or {})}
    if kind == "random_forest":
        return train_random_forest(dataset, p["trees"], p["max_depth"], seed, scaler_id)
    if kind == "knn":
        return train_knn(dataset, p["k"], scaler_id)
    if kind == "svm_linear_ovr":
        return train_linear_svm_ovr(dataset, p["C"], p["epochs"], seed, scaler_id)
    raise ValueError(f"unknown classifier {kind!r}")


__all__ = [
    "CLASSIFIERS", "DEFAULT_PARAMS", "DISPLAY_NAMES", "ClassifierModel", "ForestModel",
    "KNNModel", "LabeledDataset", "LinearSVMModel", "load_model", "predict",
    "stratified_folds", "train", "train_knn", "train_linear_svm_ovr", "train_random_forest",
]
