"""Per-flow 68-dimensional feature vectors and standardization.

Layout (1-based dims, order is part of the on-disk contract):

====== ==========================================================
1-4    FIAT min/max/mean/std (outgoing inter-arrival times)
5-8    BIAT min/max/mean/std (incoming inter-arrival times)
9-12   FLOWIAT min/max/mean/std (all packets)
13-16  active period durations min/max/mean/std
17-20  idle period durations min/max/mean/std
21-23  bytes/s, packets/s, duration
24-33  direction of the first 10 packets (+1 out, -1 in, 0 pad)
34-39  incoming bursts count/mean/max, outgoing bursts count/mean/max
40-49  first 10 incoming burst lengths
50-59  first 10 outgoing burst lengths
60-68  packet counts for the sizes in ``SIZE_BINS``
====== ==========================================================
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flowing import Flow, FlowConfig
from .trace_io import Direction

LAYOUT_VERSION = "tor68-v1"
N_FEATURES = 68
N_FIRST = 10
SIZE_BINS = (1500, 595, 583, 1097, 1384, 151, 1126, 1109, 233)

FEATURE_NAMES = (
    [f"fiat_{s}" for s in ("min", "max", "mean", "std")]
    + [f"biat_{s}" for s in ("min", "max", "mean", "std")]
    + [f"flowiat_{s}" for s in ("min", "max", "mean", "std")]
    + [f"active_{s}" for s in ("min", "max", "mean", "std")]
    + [f"idle_{s}" for s in ("min", "max", "mean", "std")]
    + ["bytes_per_s", "packets_per_s", "duration"]
    + [f"dir_{i}" for i in range(N_FIRST)]
    + ["in_bursts", "in_burst_mean", "in_burst_max", "out_bursts", "out_burst_mean", "out_burst_max"]
    + [f"in_burst_{i}" for i in range(N_FIRST)]
    + [f"out_burst_{i}" for i in range(N_FIRST)]
    + [f"size_{s}" for s in SIZE_BINS]
)
assert len(FEATURE_NAMES) == N_FEATURES


class Selector(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    ALL = "all"


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} values, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def summarize4(series) -> tuple[float, float, float, float]:
    """(min, max, mean, population std); all zeros for an empty series."""
    if len(series) == 0:
        return (0.0, 0.0, 0.0, 0.0)
    a = np.asarray(series, dtype=float)
    return (float(a.min()), float(a.max()), float(a.mean()), float(a.std()))


def _times_us(packets) -> np.ndarray:
    return np.fromiter((p.ts_us for p in packets), dtype=np.int64, count=len(packets))


def iat_series(flow: Flow, selector: Selector) -> list[float]:
    if selector is Selector.FORWARD:
        pkts = [p for p in flow.packets if p.direction == Direction.OUTGOING]
    elif selector is Selector.BACKWARD:
        pkts = [p for p in flow.packets if p.direction == Direction.INCOMING]
    else:
        pkts = list(flow.packets)
    if len(pkts) < 2:
        return []
    return (np.diff(_times_us(pkts)) / 1e6).tolist()


def active_idle(flow: Flow, activity_timeout_s: float) -> tuple[list[float], list[float]]:
    """Split a flow into active runs and idle gaps.

    A gap longer than ``activity_timeout_s`` is an idle period; the packets
    between idle periods form an active run whose duration is last minus
    first timestamp.
    """
    if activity_timeout_s <= 0:
        raise ValueError("activity timeout must be positive")
    t = _times_us(flow.packets)
    gaps = np.diff(t)
    idle_mask = gaps > round(activity_timeout_s * 1e6)
    idle = (gaps[idle_mask] / 1e6).tolist()
    cuts = np.flatnonzero(idle_mask) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts - 1, [len(t) - 1]))
    active = ((t[ends] - t[starts]) / 1e6).tolist()
    return active, idle


def compute_bursts(flow: Flow) -> tuple[list[int], list[int]]:
    """Maximal same-direction runs, as packet counts: (incoming, outgoing)."""
    incoming, outgoing = [], []
    run_dir, run_len = None, 0
    for p in flow.packets:
        if p.direction == run_dir:
            run_len += 1
            continue
        if run_dir is not None:
            (outgoing if run_dir == Direction.OUTGOING else incoming).append(run_len)
        run_dir, run_len = p.direction, 1
    if run_dir is not None:
        (outgoing if run_dir == Direction.OUTGOING else incoming).append(run_len)
    return incoming, outgoing


def _burst_summary(bursts) -> list[float]:
    if not bursts:
        return [0.0, 0.0, 0.0]
    return [float(len(bursts)), float(np.mean(bursts)), float(max(bursts))]


def _first_n(values, n=N_FIRST) -> list[float]:
    head = [float(v) for v in values[:n]]
    return head + [0.0] * (n - len(head))


def extract_features(flow: Flow, config: FlowConfig) -> FeatureVector:
    if not flow.packets:
        raise ValueError("flow has no packets")
    v: list[float] = []
    for sel in (Selector.FORWARD, Selector.BACKWARD, Selector.ALL):
        v.extend(summarize4(iat_series(flow, sel)))
    active, idle = active_idle(flow, config.activity_timeout_s)
    v.extend(summarize4(active))
    v.extend(summarize4(idle))

    n_pkts = len(flow.packets)
    n_bytes = sum(p.size_bytes for p in flow.packets)
    duration = flow.duration
    span = duration if duration > 0 else 1.0
    v.extend([n_bytes / span, n_pkts / span, duration])

    v.extend(_first_n([int(p.direction) for p in flow.packets]))
    incoming, outgoing = compute_bursts(flow)
    v.extend(_burst_summary(incoming))
    v.extend(_burst_summary(outgoing))
    v.extend(_first_n(incoming))
    v.extend(_first_n(outgoing))

    sizes = [p.size_bytes for p in flow.packets]
    v.extend(float(sizes.count(s)) for s in SIZE_BINS)
    return FeatureVector(np.array(v), flow.label)


@dataclass(frozen=True)
class Scaler:
    mu: np.ndarray
    sigma: np.ndarray
    fitted_on: str = ""

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.sigma > 0, self.sigma, 1.0)
        Z = (X - self.mu) / safe
        Z[..., self.sigma == 0] = 0.0
        return Z


def fit_scaler(vectors, fitted_on: str = "") -> Scaler:
    """Per-dimension population mean and std.

    ``vectors`` may be FeatureVectors or a 2-D array. ``fitted_on`` is a
    provenance tag recorded on the scaler.
    """
    X = as_matrix(vectors)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero vectors")
    constant = (X == X[0]).all(axis=0)
    # float round-off can leave a constant column with sigma ~1e-17
    sigma = np.where(constant, 0.0, X.std(axis=0))
    mu = np.where(constant, X[0], X.mean(axis=0))
    return Scaler(mu, sigma, fitted_on)


def apply_scaler(scaler: Scaler, v: FeatureVector) -> FeatureVector:
    return FeatureVector(scaler.transform(v.values), v.label)


def as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return vectors.astype(float, copy=False).reshape(-1, N_FEATURES)
    vectors = list(vectors)
    if not vectors:
        return np.empty((0, N_FEATURES))
    return np.vstack([v.values for v in vectors])


# -- on-disk formats --------------------------------------------------------

@dataclass
class Dataset:
    """Feature matrix plus labels and the extraction settings that produced it."""

    X: np.ndarray
    labels: list
    flow_timeout_s: float
    activity_timeout_s: float
    padding: str = "none"
    session_refs: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    @property
    def vectors(self) -> list[FeatureVector]:
        return [FeatureVector(x, lab) for x, lab in zip(self.X, self.labels)]

    def digest(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.X).tobytes())
        h.update("\0".join(lab or "" for lab in self.labels).encode())
        return h.hexdigest()[:16]

    def subset(self, mask) -> "Dataset":
        idx = np.flatnonzero(mask)
        refs = [self.session_refs[i] for i in idx] if self.session_refs else []
        return Dataset(self.X[idx], [self.labels[i] for i in idx],
                       self.flow_timeout_s, self.activity_timeout_s, self.padding, refs)


def _kv_header(tag: str, **fields) -> str:
    return "# " + " ".join([tag] + [f"{k}={v}" for k, v in fields.items()])


def _parse_kv_header(line: str, tag: str) -> dict:
    parts = line.lstrip("#").split()
    if not parts or parts[0] != tag:
        raise ValueError(f"expected a {tag!r} header, got {line.strip()!r}")
    return dict(p.split("=", 1) for p in parts[1:])


def write_dataset(ds: Dataset, path) -> None:
    lines = [_kv_header("dataset", layout=LAYOUT_VERSION, flow_timeout=repr(float(ds.flow_timeout_s)),
                        activity_timeout=repr(float(ds.activity_timeout_s)), padding=ds.padding)]
    for x, lab in zip(ds.X, ds.labels):
        lines.append(",".join(repr(float(a)) for a in x) + "," + (lab or ""))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path) -> Dataset:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty dataset file")
    meta = _parse_kv_header(text[0], "dataset")
    if meta.get("layout") != LAYOUT_VERSION:
        raise ValueError(f"{path}: layout {meta.get('layout')!r} != {LAYOUT_VERSION!r}")
    rows, labels = [], []
    for n, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != N_FEATURES + 1:
            raise ValueError(f"{path}:{n}: expected {N_FEATURES + 1} fields, got {len(parts)}")
        rows.append([float(a) for a in parts[:N_FEATURES]])
        labels.append(parts[-1] or None)
    X = np.array(rows, dtype=float).reshape(-1, N_FEATURES)
    return Dataset(X, labels, float(meta["flow_timeout"]), float(meta["activity_timeout"]),
                   meta.get("padding", "none"))


def write_scaler(scaler: Scaler, path) -> None:
    lines = [
        _kv_header("scaler", layout=LAYOUT_VERSION, fitted_on=scaler.fitted_on or "-"),
        ",".join(repr(float(a)) for a in scaler.mu),
        ",".join(repr(float(a)) for a in scaler.sigma),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_scaler(path) -> Scaler:
    header, mu, sigma = Path(path).read_text().splitlines()[:3]
    meta = _parse_kv_header(header, "scaler")
    fitted_on = meta.get("fitted_on", "")
    mu = np.array([float(a) for a in mu.split(",")])
    sigma = np.array([float(a) for a in sigma.split(",")])
    if mu.shape != (N_FEATURES,) or sigma.shape != (N_FEATURES,):
        raise ValueError(f"{path}: scaler must hold {N_FEATURES} values per line")
    return Scaler(mu, sigma, "" if fitted_on == "-" else fitted_on)

