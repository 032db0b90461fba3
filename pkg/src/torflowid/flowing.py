"""Split TCP sessions into fixed-duration flows."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .trace_io import PacketRecord, TcpFlag, TcpSession, micros

_TERMINATORS = TcpFlag.FIN | TcpFlag.RST


@dataclass(frozen=True)
class FlowConfig:
    flow_timeout_s: float = 10.0
    activity_timeout_s: float = 2.0

    def __post_init__(self):
        if self.flow_timeout_s <= 0 or self.activity_timeout_s <= 0:
            raise ValueError("timeouts must be positive")
        if self.activity_timeout_s >= self.flow_timeout_s:
            raise ValueError("activity timeout must be shorter than flow timeout")


@dataclass(frozen=True)
class Flow:
    packets: tuple[PacketRecord, ...]
    start_s: float
    end_s: float
    label: str | None = None
    session_ref: str = ""

    @property
    def duration(self) -> float:
        return (micros(self.end_s) - micros(self.start_s)) / 1_000_000


class FlowList(list):
    def __init__(self, items=(), discarded: int = 0):
        super().__init__(items)
        self.discarded = discarded


def split_flows(session: TcpSession, config: FlowConfig, session_ref: str | None = None) -> FlowList:
    """Cut ``session`` into windows of ``flow_timeout_s`` anchored at its first packet.

    Empty windows yield nothing. The window holding the first FIN (or RST)
    is the last one; packets after it are dropped and counted in
    ``.discarded``.
    """
    if not session.packets:
        raise ValueError("session has no packets")
    ref = session.ref if session_ref is None else session_ref
    t0 = session.packets[0].ts_us
    window_us = micros(config.flow_timeout_s)

    buckets: dict[int, list[PacketRecord]] = {}
    stop_window = None
    kept = 0
    for p in session.packets:
        w = (p.ts_us - t0) // window_us
        if stop_window is not None and w > stop_window:
            break
        buckets.setdefault(w, []).append(p)
        kept += 1
        if stop_window is None and p.tcp_flags & _TERMINATORS:
            stop_window = w

    flows = FlowList(discarded=len(session.packets) - kept)
    for w in sorted(buckets):
        pkts = tuple(buckets[w])
        flows.append(Flow(pkts, pkts[0].timestamp, pkts[-1].timestamp, None, ref))
    return flows


def label_flows(flows, label: str) -> list[Flow]:
    if not label:
        raise ValueError("label must be non-empty")
    out = []
    for f in flows:
        if f.label is not None and f.label != label:
            raise ValueError(f"flow already labeled {f.label!r}, refusing {label!r}")
        out.append(replace(f, label=label))
    return out
