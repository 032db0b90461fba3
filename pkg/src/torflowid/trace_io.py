"""Classic PCAP reading/writing and TCP session assembly.

Only TCP over IPv4 is kept. Packet size is the IP total-length field, so the
same capture yields the same sizes regardless of link layer.
"""
from __future__ import annotations

import enum
import ipaddress
import socket
import struct
from dataclasses import dataclass, field
from pathlib import Path

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_LINUX_SLL = 113

_GLOBAL_HDR = struct.Struct("<IHHiIII")
_RECORD_HDR_LE = struct.Struct("<IIII")
_RECORD_HDR_BE = struct.Struct(">IIII")

MIN_PACKET_SIZE = 40
MAX_PACKET_SIZE = 65535


class PcapError(Exception):
    """Base class for capture file problems."""


class UnsupportedFormatError(PcapError):
    pass


class PcapParseError(PcapError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class TcpFlag(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20


_FLAGS = [TcpFlag(i) for i in range(64)]


class Direction(enum.IntEnum):
    OUTGOING = 1
    INCOMING = -1
    UNASSIGNED = 0


def micros(t: float) -> int:
    return int(round(t * 1_000_000))


def from_micros(us: int) -> float:
    sec, usec = divmod(int(us), 1_000_000)
    return sec + usec / 1_000_000


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    src_addr: str
    dst_addr: str
    src_port: int
    dst_port: int
    size_bytes: int
    tcp_flags: TcpFlag = TcpFlag(0)
    direction: Direction = Direction.UNASSIGNED
    ts_us: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if not MIN_PACKET_SIZE <= self.size_bytes <= MAX_PACKET_SIZE:
            raise ValueError(f"size_bytes {self.size_bytes} outside [40, 65535]")
        # timestamps live on the microsecond grid so PCAP round-trips are exact
        us = micros(self.timestamp)
        object.__setattr__(self, "ts_us", us)
        object.__setattr__(self, "timestamp", from_micros(us))
        if type(self.tcp_flags) is not TcpFlag:
            object.__setattr__(self, "tcp_flags", TcpFlag(self.tcp_flags))

    def with_direction(self, direction: Direction) -> "PacketRecord":
        return PacketRecord(self.timestamp, self.src_addr, self.dst_addr, self.src_port,
                            self.dst_port, self.size_bytes, self.tcp_flags, direction)

    @property
    def src(self) -> tuple[str, int]:
        return (self.src_addr, self.src_port)

    @property
    def dst(self) -> tuple[str, int]:
        return (self.dst_addr, self.dst_port)


@dataclass(frozen=True)
class TcpSession:
    key: tuple
    client_endpoint: tuple[str, int]
    packets: tuple[PacketRecord, ...]
    fin_seen: bool = False

    @property
    def ref(self) -> str:
        (a, ap), (b, bp), _ = self.key
        return f"{a}:{ap}-{b}:{bp}"

    @property
    def start(self) -> float:
        return self.packets[0].timestamp


class PacketList(list):
    """List of PacketRecord carrying the number of frames that were skipped."""

    def __init__(self, items=(), skipped: int = 0):
        super().__init__(items)
        self.skipped = skipped


def _parse_ipv4_tcp(data: bytes):
    """Return (src, dst, sport, dport, total_len, flags) or None if not TCP/IPv4."""
    if len(data) < 20 or data[0] >> 4 != 4:
        return None
    ihl = (data[0] & 0x0F) * 4
    if ihl < 20 or data[9] != 6:
        return None
    if len(data) < ihl + 14:
        return None
    total_len = struct.unpack_from(">H", data, 2)[0]
    src = socket.inet_ntoa(data[12:16])
    dst = socket.inet_ntoa(data[16:20])
    sport, dport = struct.unpack_from(">HH", data, ihl)
    flags = data[ihl + 13] & 0x3F
    return src, dst, sport, dport, total_len, flags


def _strip_link(linktype: int, frame: bytes):
    if linktype == LINKTYPE_RAW:
        return frame
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return None
        ethertype = struct.unpack_from(">H", frame, 12)[0]
        offset = 14
        while ethertype in (0x8100, 0x88A8) and len(frame) >= offset + 4:
            ethertype = struct.unpack_from(">H", frame, offset + 2)[0]
            offset += 4
        return frame[offset:] if ethertype == 0x0800 else None
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            return None
        proto = struct.unpack_from(">H", frame, 14)[0]
        return frame[16:] if proto == 0x0800 else None
    raise UnsupportedFormatError(f"unsupported link type {linktype}")


def read_pcap(path) -> PacketList:
    """Read TCP/IPv4 packets from a classic PCAP file, in file order.

    Non-TCP and non-IPv4 frames are skipped and counted in ``.skipped`` of the
    returned list.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 24:
        raise PcapParseError("truncated global header", 0)
    magic_le = struct.unpack_from("<I", buf, 0)[0]
    magic_be = struct.unpack_from(">I", buf, 0)[0]
    if magic_le in (PCAP_MAGIC, PCAP_MAGIC_NS):
        endian, magic = "<", magic_le
    elif magic_be in (PCAP_MAGIC, PCAP_MAGIC_NS):
        endian, magic = ">", magic_be
    else:
        raise UnsupportedFormatError(f"bad pcap magic 0x{magic_le:08x}")
    nanos = magic == PCAP_MAGIC_NS
    linktype = struct.unpack_from(endian + "I", buf, 20)[0] & 0x0FFFFFFF
    if linktype not in (LINKTYPE_ETHERNET, LINKTYPE_RAW, LINKTYPE_LINUX_SLL):
        raise UnsupportedFormatError(f"unsupported link type {linktype}")

    rec_hdr = _RECORD_HDR_LE if endian == "<" else _RECORD_HDR_BE
    out = PacketList()
    offset = 24
    while offset < len(buf):
        if offset + 16 > len(buf):
            raise PcapParseError("truncated record header", offset)
        ts_sec, ts_frac, incl_len, _orig_len = rec_hdr.unpack_from(buf, offset)
        start = offset + 16
        if start + incl_len > len(buf):
            raise PcapParseError("truncated record data", offset)
        frame = buf[start:start + incl_len]
        offset = start + incl_len

        ip = _strip_link(linktype, frame)
        parsed = _parse_ipv4_tcp(ip) if ip is not None else None
        if parsed is None or parsed[4] < MIN_PACKET_SIZE:
            out.skipped += 1
            continue
        src, dst, sport, dport, total_len, flags = parsed
        usec = ts_frac // 1000 if nanos else ts_frac
        out.append(PacketRecord(
            timestamp=from_micros(ts_sec * 1_000_000 + usec),
            src_addr=src, dst_addr=dst, src_port=sport, dst_port=dport,
            size_bytes=total_len, tcp_flags=_FLAGS[flags],
        ))
    return out


def _ip_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f">{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _serialize(p: PacketRecord) -> bytes:
    ip = bytearray(struct.pack(
        ">BBHHHBBH4s4s", 0x45, 0, p.size_bytes, 0, 0x4000, 64, 6, 0,
        ipaddress.IPv4Address(p.src_addr).packed,
        ipaddress.IPv4Address(p.dst_addr).packed,
    ))
    struct.pack_into(">H", ip, 10, _ip_checksum(bytes(ip)))
    tcp = struct.pack(">HHIIBBHHH", p.src_port, p.dst_port, 0, 0,
                      5 << 4, int(p.tcp_flags), 65535, 0, 0)
    return bytes(ip) + tcp + bytes(p.size_bytes - 40)


def write_pcap(packets, path) -> None:
    """Write records as raw-IP classic PCAP (little-endian, microsecond stamps)."""
    prev = -1
    for i, p in enumerate(packets):
        if p.ts_us < prev:
            raise ValueError(f"packets not time-ordered at index {i}")
        prev = p.ts_us
    chunks = [_GLOBAL_HDR.pack(PCAP_MAGIC, 2, 4, 0, 0, MAX_PACKET_SIZE, LINKTYPE_RAW)]
    for p in packets:
        sec, usec = divmod(p.ts_us, 1_000_000)
        chunks.append(_RECORD_HDR_LE.pack(sec, usec, p.size_bytes, p.size_bytes))
        chunks.append(_serialize(p))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def session_key(p: PacketRecord) -> tuple:
    a, b = sorted([p.src, p.dst])
    return (a, b, "TCP")


def assemble_sessions(packets, client_hint: str | None = None) -> list[TcpSession]:
    """Group packets by unordered 5-tuple and orient each group.

    The client is the sender of the first SYN without ACK, else the sender of
    the earliest packet. ``client_hint`` wins whenever it names exactly one of
    the two endpoint addresses.
    """
    groups: dict[tuple, list[PacketRecord]] = {}
    for p in packets:
        groups.setdefault(session_key(p), []).append(p)

    sessions = []
    for key, pkts in groups.items():
        pkts = sorted(pkts, key=lambda p: p.ts_us)  # stable: ties keep capture order
        client = None
        a, b, _ = key
        if client_hint is not None and (a[0] == client_hint) != (b[0] == client_hint):
            client = a if a[0] == client_hint else b
        if client is None:
            for p in pkts:
                if p.tcp_flags & TcpFlag.SYN and not p.tcp_flags & TcpFlag.ACK:
                    client = p.src
                    break
        if client is None:
            client = pkts[0].src
        oriented = tuple(
            p.with_direction(Direction.OUTGOING if p.src == client else Direction.INCOMING)
            for p in pkts
        )
        fin = any(p.tcp_flags & TcpFlag.FIN for p in pkts)
        sessions.append(TcpSession(key=key, client_endpoint=client, packets=oriented, fin_seen=fin))
    sessions.sort(key=lambda s: (s.packets[0].ts_us, s.key))
    return sessions
