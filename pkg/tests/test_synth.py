import filecmp

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torflowid.synth import (ArchetypeSpec, PaddingConfig, PaddingMode, build_labeled_corpus,
                             generate_app_trace, inject_padding, load_archetypes, read_manifest,
                             sample_padding_timeout)
from torflowid.trace_io import Direction, PacketRecord, TcpFlag, read_pcap

SPECS = {s.name: s for s in load_archetypes()}
A, B = ("10.0.0.2", 40000), ("1.2.3.4", 443)


def real(t, outgoing=True, size=600):
    src, dst = (A, B) if outgoing else (B, A)
    return PacketRecord(t, src[0], dst[0], src[1], dst[1], size, TcpFlag.ACK,
                        Direction.OUTGOING if outgoing else Direction.INCOMING)


def gaps(packets):
    ts = [p.ts_us for p in packets]
    return [(b - a) / 1e6 for a, b in zip(ts, ts[1:])]


def test_six_presets():
    assert set(SPECS) == {"streaming_video", "streaming_audio", "social_feed", "voip", "torrent", "browser"}


@pytest.mark.parametrize("mode,lo,hi", [("full", 1.5, 9.5), ("reduced", 9.0, 14.0)])
def test_padding_timeout_range(mode, lo, hi):
    rng = np.random.default_rng(0)
    cfg = PaddingConfig(PaddingMode(mode))
    draws = [sample_padding_timeout(cfg, rng) for _ in range(10_000)]
    assert lo <= min(draws) and max(draws) <= hi
    again = np.random.default_rng(0)
    assert draws[:50] == [sample_padding_timeout(cfg, again) for _ in range(50)]


def test_padding_none():
    cfg = PaddingConfig(PaddingMode.NONE)
    with pytest.raises(ValueError):
        sample_padding_timeout(cfg, np.random.default_rng(0))
    pkts = [real(0), real(100)]
    assert inject_padding(pkts, cfg, np.random.default_rng(0)) == pkts


def test_full_padding_30s_gap():
    out = inject_padding([real(0), real(30, False)], PaddingConfig(PaddingMode.FULL), np.random.default_rng(1))
    cells = [p for p in out if p.size_bytes == 543]
    assert len(cells) >= 3
    assert max(gaps(out)) <= 9.5
    assert all(c.tcp_flags == 0 for c in cells)
    assert {c.direction for c in cells} <= {Direction.OUTGOING, Direction.INCOMING}
    assert out[-1] == real(30, False)


def test_reduced_padding_5s_gap():
    pkts = [real(0), real(5)]
    assert inject_padding(pkts, PaddingConfig(PaddingMode.REDUCED), np.random.default_rng(2)) == pkts


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 120_000_000), min_size=2, max_size=20, unique=True),
       st.sampled_from([("full", 9.5), ("reduced", 14.0)]), st.integers(0, 2**32 - 1))
def test_padding_properties(offsets, mode, seed):
    pkts = [real(us / 1e6, i % 2 == 0) for i, us in enumerate(sorted(offsets))]
    out = inject_padding(pkts, PaddingConfig(PaddingMode(mode[0])), np.random.default_rng(seed))
    assert [p for p in out if p.size_bytes != 543] == pkts  # real packets kept verbatim, in order
    assert max(gaps(out)) <= mode[1] + 1e-6
    assert min(gaps(out)) >= 0
    assert out[-1] == pkts[-1]


def test_archetype_validation():
    good = dict(name="x", think_time={"mean": 1, "jitter": 0.5}, packet_gap=0.01, up_burst=[1, 2],
                down_up_ratio=2.0, sizes={"1500": 0.5, "other": 0.5}, session_duration=60)
    ArchetypeSpec.from_dict(good)
    with pytest.raises(ValueError):
        ArchetypeSpec.from_dict({**good, "sizes": {"1500": 0.5, "other": 0.4}})
    with pytest.raises(ValueError):
        ArchetypeSpec.from_dict({**good, "session_duration": 0})


def test_voip_trace_shape():
    s = generate_app_trace(SPECS["voip"], 60, seed=4)
    data = s.packets[3:-1]
    assert max(gaps(s.packets)) < SPECS["social_feed"].think_time_mean
    n_out = sum(p.direction == Direction.OUTGOING for p in data)
    ratio = (len(data) - n_out) / n_out
    assert abs(ratio - SPECS["voip"].down_up_ratio) <= 0.2 * SPECS["voip"].down_up_ratio


@pytest.mark.parametrize("name", sorted(SPECS))
def test_trace_bounds(name):
    s = generate_app_trace(SPECS[name], 60, seed=9)
    assert s.packets[0].tcp_flags == TcpFlag.SYN and s.packets[0].direction == Direction.OUTGOING
    assert s.packets[-1].tcp_flags & TcpFlag.FIN and s.packets[-1].direction == Direction.OUTGOING
    assert s.packets[-1].timestamp <= 60
    assert s == generate_app_trace(SPECS[name], 60, seed=9)


def test_corpus_counts_and_determinism(tmp_path):
    specs = list(SPECS.values())
    pad = PaddingConfig(PaddingMode.FULL)
    m1 = build_labeled_corpus(specs, 2, 30, pad, 7, tmp_path / "a")
    build_labeled_corpus(specs, 2, 30, pad, 7, tmp_path / "b")
    assert len(m1.entries) == 12 and len(list((tmp_path / "a").glob("*.pcap"))) == 12
    lines = (tmp_path / "a" / "manifest.csv").read_text().splitlines()
    assert lines[0].startswith("#manifest") and len(lines) == 13
    names = [e.filename for e in m1.entries] + ["manifest.csv"]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert not mismatch and not errors
    back = read_manifest(tmp_path / "a" / "manifest.csv")
    assert back.entries == m1.entries and back.padding_mode == "full"
    assert back.labels == [s.name for s in specs]
    for e in back.entries:
        assert max(gaps(read_pcap(back.path_of(e)))) <= 9.5 + 1e-6


def test_corpus_errors(tmp_path):
    with pytest.raises(ValueError):
        build_labeled_corpus([], 1, 10, PaddingConfig(PaddingMode.FULL), 0, tmp_path)
    (tmp_path / "file").write_text("")
    with pytest.raises(OSError):
        build_labeled_corpus(list(SPECS.values())[:1], 1, 10, PaddingConfig(PaddingMode.FULL), 0,
                             tmp_path / "file" / "sub")
