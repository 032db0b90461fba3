"""Synthetic app traffic with Tor connection-padding timers.

Each app class is an archetype: think-time gaps separate request/response
exchanges whose burst lengths and packet sizes follow per-archetype
distributions. Padding is simulated afterwards with two idle timers, one per
connection endpoint.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .features import SIZE_BINS
from .trace_io import (Direction, PacketRecord, TcpFlag, TcpSession, assemble_sessions,
                       from_micros, micros, write_pcap)

OTHER = "other"
OTHER_SIZE_RANGE = (52, 1460)
MANIFEST_VERSION = 1


class PaddingMode(str, enum.Enum):
    NONE = "none"
    REDUCED = "reduced"
    FULL = "full"


PADDING_RANGES = {
    PaddingMode.FULL: (1.5, 9.5),
    PaddingMode.REDUCED: (9.0, 14.0),
}


@dataclass(frozen=True)
class PaddingConfig:
    mode: PaddingMode = PaddingMode.REDUCED
    padding_cell_size: int = 543

    def __post_init__(self):
        object.__setattr__(self, "mode", PaddingMode(self.mode))

    @property
    def timeout_range(self) -> tuple[float, float]:
        if self.mode is PaddingMode.NONE:
            raise ValueError("padding mode 'none' has no timeout range")
        return PADDING_RANGES[self.mode]


@dataclass(frozen=True)
class ArchetypeSpec:
    name: str
    think_time_mean: float
    think_time_jitter: float
    packet_gap: float
    up_burst: tuple[int, int]
    down_up_ratio: float
    sizes: dict
    session_duration: float = 120.0

    def __post_init__(self):
        total = sum(self.sizes.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"{self.name}: size probabilities sum to {total}, not 1")
        bad = [k for k in self.sizes if k != OTHER and int(k) not in SIZE_BINS]
        if bad:
            raise ValueError(f"{self.name}: sizes {bad} are not in the palette")
        if self.session_duration <= 0 or self.think_time_mean < 0 or self.packet_gap < 0:
            raise ValueError(f"{self.name}: durations must be positive")
        lo, hi = self.up_burst
        if not 1 <= lo <= hi:
            raise ValueError(f"{self.name}: bad burst range {self.up_burst}")
        if self.down_up_ratio <= 0:
            raise ValueError(f"{self.name}: down_up_ratio must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ArchetypeSpec":
        return cls(
            name=d["name"],
            think_time_mean=float(d["think_time"]["mean"]),
            think_time_jitter=float(d["think_time"]["jitter"]),
            packet_gap=float(d["packet_gap"]),
            up_burst=tuple(int(v) for v in d["up_burst"]),
            down_up_ratio=float(d["down_up_ratio"]),
            sizes={str(k): float(v) for k, v in d["sizes"].items()},
            session_duration=float(d.get("session_duration", 120.0)),
        )


def load_archetypes(path=None) -> list[ArchetypeSpec]:
    """Load archetype presets; the packaged six are used when ``path`` is None."""
    if path is None:
        text = resources.files("torflowid").joinpath("archetypes.json").read_text()
    else:
        text = Path(path).read_text()
    return [ArchetypeSpec.from_dict(d) for d in json.loads(text)["archetypes"]]


def sample_padding_timeout(config: PaddingConfig, rng: np.random.Generator) -> float:
    lo, hi = config.timeout_range
    return float(rng.uniform(lo, hi))


def inject_padding(packets, config: PaddingConfig, rng: np.random.Generator) -> list[PacketRecord]:
    """Add padding cells wherever an endpoint's idle timer would fire.

    Both timers start at the first packet. A real packet re-arms both; a
    padding cell re-arms only the timer of the side that sent it. Nothing is
    emitted after the last real packet.
    """
    packets = list(packets)
    if config.mode is PaddingMode.NONE or len(packets) < 2:
        return packets
    first = packets[0]
    if first.direction == Direction.INCOMING:
        client, guard = first.dst, first.src
    else:
        client, guard = first.src, first.dst

    def arm(t_us):
        return t_us + micros(sample_padding_timeout(config, rng))

    def cell(t_us, outgoing):
        src, dst = (client, guard) if outgoing else (guard, client)
        return PacketRecord(from_micros(t_us), src[0], dst[0], src[1], dst[1],
                            config.padding_cell_size, TcpFlag(0),
                            Direction.OUTGOING if outgoing else Direction.INCOMING)

    out = [first]
    client_due = arm(first.ts_us)
    guard_due = arm(first.ts_us)
    for p in packets[1:]:
        t = p.ts_us
        while min(client_due, guard_due) < t:
            if client_due <= guard_due:
                out.append(cell(client_due, True))
                client_due = arm(client_due)
            else:
                out.append(cell(guard_due, False))
                guard_due = arm(guard_due)
        out.append(p)
        client_due, guard_due = arm(t), arm(t)
    return out


def _palette(spec: ArchetypeSpec):
    keys = list(spec.sizes)
    cdf = np.cumsum([spec.sizes[k] for k in keys])
    return keys, cdf / cdf[-1]


def generate_app_trace(spec: ArchetypeSpec, duration: float | None = None, seed: int = 0,
                       start: float = 0.0) -> TcpSession:
    """One client/guard TCP session of roughly ``duration`` seconds.

    Starts with a client SYN handshake, alternates think-time gaps with an
    outgoing request burst and an incoming response burst, and ends with a
    client FIN no later than ``start + duration``.
    """
    duration = spec.session_duration if duration is None else float(duration)
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    client = (f"10.{rng.integers(0, 256)}.{rng.integers(0, 256)}.{rng.integers(2, 255)}",
              int(rng.integers(32768, 61000)))
    guard = (f"{rng.integers(64, 200)}.{rng.integers(0, 256)}.{rng.integers(0, 256)}.{rng.integers(1, 255)}",
             int(rng.choice([443, 9001])))
    rtt = min(float(rng.uniform(0.05, 0.3)), duration / 10)
    start_us = micros(start)
    end_us = start_us + micros(duration)
    keys, cdf = _palette(spec)
    stop_us = end_us - micros(min(0.1, duration / 10))

    packets = []

    def emit(t_us, outgoing, size, flags):
        src, dst = (client, guard) if outgoing else (guard, client)
        packets.append(PacketRecord(from_micros(t_us), src[0], dst[0], src[1], dst[1], size,
                                    flags, Direction.OUTGOING if outgoing else Direction.INCOMING))

    def draw_size():
        k = keys[min(int(np.searchsorted(cdf, rng.random(), side="right")), len(keys) - 1)]
        return int(rng.integers(*OTHER_SIZE_RANGE, endpoint=True)) if k == OTHER else int(k)

    t = start_us
    emit(t, True, 60, TcpFlag.SYN)
    t += micros(rtt)
    emit(t, False, 60, TcpFlag.SYN | TcpFlag.ACK)
    t += 1
    emit(t, True, 52, TcpFlag.ACK)

    data = TcpFlag.PSH | TcpFlag.ACK
    lo_think = max(0.0, spec.think_time_mean - spec.think_time_jitter)
    hi_think = spec.think_time_mean + spec.think_time_jitter
    done = False
    while not done:
        t += max(1, micros(rng.uniform(lo_think, hi_think)))
        n_up = int(rng.integers(spec.up_burst[0], spec.up_burst[1], endpoint=True))
        expected_down = n_up * spec.down_up_ratio * rng.uniform(0.8, 1.2)
        n_down = max(1, int(expected_down) + int(rng.random() < expected_down % 1))
        for outgoing, count in ((True, n_up), (False, n_down)):
            if not outgoing:
                t += micros(rtt / 2)
            for _ in range(count):
                t += max(1, micros(rng.exponential(spec.packet_gap))) if spec.packet_gap else 1
                if t >= stop_us:
                    done = True
                    break
                emit(t, outgoing, draw_size(), data)
            if done:
                break

    fin_t = min(max(packets[-1].ts_us + 1, stop_us), end_us)
    emit(fin_t, True, 52, TcpFlag.FIN | TcpFlag.ACK)
    return assemble_sessions(packets)[0]


@dataclass(frozen=True)
class ManifestEntry:
    filename: str
    label: str
    padding_mode: str
    seed: int


@dataclass
class Manifest:
    entries: list
    root: Path
    corpus_seed: int = 0
    padding_cell_size: int = 543
    duration: float = 120.0

    @property
    def labels(self) -> list:
        seen = []
        for e in self.entries:
            if e.label not in seen:
                seen.append(e.label)
        return seen

    @property
    def padding_mode(self) -> str:
        modes = {e.padding_mode for e in self.entries}
        if len(modes) != 1:
            raise ValueError(f"manifest mixes padding modes {sorted(modes)}")
        return modes.pop()

    def path_of(self, entry: ManifestEntry) -> Path:
        return self.root / entry.filename


def write_manifest(manifest: Manifest, path) -> None:
    header = (f"#manifest version={MANIFEST_VERSION} corpus_seed={manifest.corpus_seed} "
              f"padding_cell_size={manifest.padding_cell_size} duration={manifest.duration!r} "
              "columns=filename,label,padding_mode,seed")
    rows = [f"{e.filename},{e.label},{e.padding_mode},{e.seed}" for e in manifest.entries]
    Path(path).write_text("\n".join([header] + rows) + "\n")


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("#manifest"):
        raise ValueError(f"{path}: missing '#manifest' header line")
    meta = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
    entries = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{n}: expected 4 fields, got {len(parts)}")
        entries.append(ManifestEntry(parts[0], parts[1], parts[2], int(parts[3])))
    return Manifest(entries, path.parent, int(meta.get("corpus_seed", 0)),
                    int(meta.get("padding_cell_size", 543)), float(meta.get("duration", 0)))


def session_seed(corpus_seed: int, class_index: int, session_index: int) -> int:
    ss = np.random.SeedSequence(corpus_seed, spawn_key=(class_index, session_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_labeled_corpus(specs, sessions_per_class: int, duration: float,
                         padding: PaddingConfig, seed: int, out_dir) -> Manifest:
    """Write one padded PCAP per synthetic session plus ``manifest.csv``."""
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one archetype")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for ci, spec in enumerate(specs):
        for si in range(sessions_per_class):
            s = session_seed(seed, ci, si)
            session = generate_app_trace(spec, duration, s)
            pkts = inject_padding(session.packets, padding, np.random.default_rng([s, 1]))
            name = f"{spec.name}_{si:04d}.pcap"
            write_pcap(pkts, out / name)
            entries.append(ManifestEntry(name, spec.name, padding.mode.value, s))
    manifest = Manifest(entries, out, seed, padding.padding_cell_size, float(duration))
    write_manifest(manifest, out / "manifest.csv")
    return manifest
