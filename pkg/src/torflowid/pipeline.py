"""Offline training/deanonymization pipeline and the 16-cell experiment grid."""
from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import learn
from .features import Dataset, extract_features, fit_scaler
from .flowing import FlowConfig, label_flows, split_flows
from .learn import LabeledDataset, stratified_folds
from .metrics import confusion_matrix, overall_metrics
from .synth import Manifest, read_manifest
from .trace_io import assemble_sessions, read_pcap

log = logging.getLogger(__name__)

BROWSER_LABEL = "browser"


@dataclass(frozen=True)
class ExperimentConfig:
    padding: str = "reduced"
    flow_timeout_s: float = 10.0
    activity_timeout_s: float = 2.0
    include_browser: bool = True
    classifiers: tuple = learn.CLASSIFIERS
    folds: int = 5
    seed: int = 0
    browser_label: str = BROWSER_LABEL
    classifier_params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.padding not in ("reduced", "full", "none"):
            raise ValueError(f"unknown padding mode {self.padding!r}")
        FlowConfig(self.flow_timeout_s, self.activity_timeout_s)
        unknown = set(self.classifiers) - set(learn.CLASSIFIERS)
        if unknown:
            raise ValueError(f"unknown classifiers: {sorted(unknown)}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        object.__setattr__(self, "classifiers", tuple(self.classifiers))

    @property
    def flow_config(self) -> FlowConfig:
        return FlowConfig(self.flow_timeout_s, self.activity_timeout_s)

    def params_for(self, kind: str) -> dict:
        return {**learn.DEFAULT_PARAMS[kind], **self.classifier_params.get(kind, {})}


@dataclass(frozen=True)
class LoadedSession:
    label: str
    filename: str
    session: object


def load_corpus(manifest: Manifest) -> list[LoadedSession]:
    """Read every PCAP listed in the manifest and assemble its TCP sessions."""
    out = []
    for entry in manifest.entries:
        path = manifest.path_of(entry)
        if not path.is_file():
            raise FileNotFoundError(f"corpus file missing: {path}")
        packets = read_pcap(path)
        for s in assemble_sessions(packets):
            out.append(LoadedSession(entry.label, entry.filename, s))
    return out


def extract_dataset(sessions, config: FlowConfig, padding: str = "none") -> Dataset:
    rows, labels, refs = [], [], []
    for ls in sessions:
        ref = f"{ls.filename}#{ls.session.ref}"
        flows = label_flows(split_flows(ls.session, config, ref), ls.label)
        for f in flows:
            rows.append(extract_features(f, config).values)
            labels.append(f.label)
            refs.append(ref)
    X = np.vstack(rows) if rows else np.empty((0, 68))
    return Dataset(X, labels, config.flow_timeout_s, config.activity_timeout_s, padding, refs)


def train_tag(dataset_digest: str, fold: int, train_idx) -> str:
    """Provenance tag naming exactly which rows a scaler was fitted on."""
    h = hashlib.sha256(np.asarray(train_idx, dtype=np.int64).tobytes()).hexdigest()[:12]
    return f"{dataset_digest}/fold{fold}/train-{h}"


def derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, dtype=np.uint64)[0])


@dataclass
class FoldRecord:
    fold: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    scaler_fitted_on: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    classes: tuple
    n_flows: int
    class_counts: dict
    confusion: dict            # classifier -> ConfusionMatrix
    reports: dict              # classifier -> Report
    folds: list                # FoldRecord per fold
    dataset_digest: str
    predictions: dict = field(default_factory=dict)  # classifier -> per-flow predicted label
    name: str = "experiment"


def run_on_dataset(config: ExperimentConfig, dataset: Dataset, classes=None, name="experiment") -> ExperimentResult:
    """Cross-validate every configured classifier on an extracted dataset."""
    if classes is None:
        classes = sorted(set(dataset.labels))
    classes = tuple(classes)
    if not config.include_browser:
        classes = tuple(c for c in classes if c != config.browser_label)
        dataset = dataset.subset([lab != config.browser_label for lab in dataset.labels])
    counts = {c: 0 for c in classes}
    for lab in dataset.labels:
        if lab not in counts:
            raise ValueError(f"flow label {lab!r} is not one of the experiment classes")
        counts[lab] += 1
    empty = [c for c, n in counts.items() if n == 0]
    if empty:
        raise ValueError(f"class {empty[0]!r} has zero flows")

    digest = dataset.digest()
    labeled = LabeledDataset(dataset.X, list(dataset.labels), classes)
    folds = stratified_folds(labeled, config.folds, config.seed)
    preds = {kind: [None] * len(labeled) for kind in config.classifiers}
    records = []
    for f, (train_idx, test_idx) in enumerate(folds):
        tag = train_tag(digest, f, train_idx)
        scaler = fit_scaler(labeled.X[train_idx], fitted_on=tag)
        train_set = LabeledDataset(scaler.transform(labeled.X[train_idx]),
                                   [labeled.y[i] for i in train_idx], classes)
        Z_test = scaler.transform(labeled.X[test_idx])
        for ci, kind in enumerate(config.classifiers):
            model = learn.train(kind, train_set, config.params_for(kind),
                                seed=derive_seed(config.seed, f, ci), scaler_id=tag)
            for i, p in zip(test_idx, model.predict_many(Z_test)):
                preds[kind][i] = p
        records.append(FoldRecord(f, train_idx, test_idx, tag))
        log.debug("%s: fold %d/%d done", name, f + 1, config.folds)

    confusion = {k: confusion_matrix(labeled.y, preds[k], classes) for k in config.classifiers}
    return ExperimentResult(
        config=config, classes=classes, n_flows=len(labeled), class_counts=counts,
        confusion=confusion, reports={k: overall_metrics(cm) for k, cm in confusion.items()},
        folds=records, dataset_digest=digest, predictions=preds, name=name,
    )


def run_experiment(config: ExperimentConfig, manifest, sessions=None, name="experiment") -> ExperimentResult:
    """Corpus manifest -> sessions -> flows -> features -> cross-validated reports."""
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    mode = manifest.padding_mode
    if mode != config.padding:
        raise ValueError(f"config asks for {config.padding!r} padding but corpus was built with {mode!r}")
    if sessions is None:
        sessions = load_corpus(manifest)
    dataset = extract_dataset(sessions, config.flow_config, mode)
    return run_on_dataset(config, dataset, manifest.labels, name)


def grid_configs(base: ExperimentConfig) -> list[ExperimentConfig]:
    """The 16 cells in experiment-table order: flow timeout, activity timeout, padding, browser."""
    cells = []
    for tf, ta, pad, browser in itertools.product((10.0, 15.0), (2.0, 5.0), ("reduced", "full"), (True, False)):
        cells.append(replace(base, padding=pad, flow_timeout_s=tf, activity_timeout_s=ta,
                             include_browser=browser))
    return cells


def run_grid(base: ExperimentConfig, manifests: dict, on_result=None) -> list[ExperimentResult]:
    """Run all 16 cells; ``manifests`` maps padding mode to a corpus manifest."""
    loaded = {}
    for mode in ("reduced", "full"):
        if mode not in manifests:
            raise ValueError(f"grid needs a {mode!r} padding corpus")
        m = manifests[mode]
        m = m if isinstance(m, Manifest) else read_manifest(m)
        loaded[mode] = (m, load_corpus(m))
    results = []
    for i, cfg in enumerate(grid_configs(base), start=1):
        m, sessions = loaded[cfg.padding]
        res = run_experiment(cfg, m, sessions, name=f"exp{i:02d}")
        log.info("exp%02d done (%d flows)", i, res.n_flows)
        if on_result is not None:
            on_result(i, res)
        results.append(res)
    return results

