"""Trace ingestion: parse packet traces, segment biflows, extract matrices.

Two trace sources are supported:

* CSV with header ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len
  and an optional trailing label column
* classic libpcap files (Ethernet link type, IPv4, TCP/UDP); payload length
  is computed from the IP header so snapped captures work

Zero-payload packets are dropped before segmentation, so the biflow
initiator is the source of the first packet that actually carries data.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import (
    BiflowRecord,
    Corpus,
    DataError,
    Direction,
    FlowKey,
    PacketEvent,
    TrafficMatrix,
    canonical_key,
    make_label_space,
)

CSV_COLUMNS = ("ts_us", "src_ip", "dst_ip", "src_port", "dst_port",
               "proto", "payload_len")

_PROTO_NAMES = {"6": "TCP", "17": "UDP"}


@dataclass(frozen=True)
class TraceEvent:
    """One parsed packet, prior to direction assignment."""

    ts_us: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: str
    payload_len: int
    label: str | None = None


@dataclass
class ParseStats:
    rows: int = 0
    parsed: int = 0
    malformed: int = 0
    non_ipv4: int = 0
    non_tcp_udp: int = 0
    fragments: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SegmentStats:
    packets: int = 0
    zero_payload: int = 0
    biflows: int = 0
    unlabeled_biflows: int = 0
    label_conflicts: int = 0
    empty_after_filter: int = 0
    truncated_biflows: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class LabelRule:
    """How biflows get their class label.

    mode "column": use the label column of the first packet in the biflow
    mode "port":   look up the lower port of the canonical key in port_map
    mode "fixed":  every biflow gets fixed_label
    """

    mode: str
    port_map: dict[int, str] = field(default_factory=dict)
    fixed_label: str | None = None

    def __post_init__(self):
        if self.mode not in ("column", "port", "fixed"):
            raise DataError(f"unknown label rule mode {self.mode!r}")
        if self.mode == "port" and not self.port_map:
            raise DataError("label rule 'port' requires a port map")
        if self.mode == "fixed" and not self.fixed_label:
            raise DataError("label rule 'fixed' requires a label name")


def parse_csv_trace(path: str | Path) -> tuple[list[TraceEvent], ParseStats]:
    path = Path(path)
    stats = ParseStats()
    events: list[TraceEvent] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty trace file") from None
        header = [h.strip() for h in header]
        has_label = False
        if tuple(header) == CSV_COLUMNS:
            pass
        elif tuple(header) == CSV_COLUMNS + ("label",):
            has_label = True
        else:
            raise DataError(
                f"{path}: unexpected CSV header {header}, "
                f"expected {list(CSV_COLUMNS)} (+ optional 'label')"
            )
        want = len(CSV_COLUMNS) + (1 if has_label else 0)
        for row in reader:
            stats.rows += 1
            if len(row) != want:
                stats.malformed += 1
                continue
            try:
                proto = row[5].strip()
                proto = _PROTO_NAMES.get(proto, proto.upper())
                ev = TraceEvent(
                    ts_us=int(row[0]),
                    src_ip=row[1].strip(),
                    dst_ip=row[2].strip(),
                    src_port=int(row[3]),
                    dst_port=int(row[4]),
                    protocol=proto,
                    payload_len=int(row[6]),
                    label=row[7].strip() if has_label else None,
                )
            except ValueError:
                stats.malformed += 1
                continue
            if ev.payload_len < 0 or not 0 <= ev.src_port <= 65535 \
                    or not 0 <= ev.dst_port <= 65535:
                stats.malformed += 1
                continue
            events.append(ev)
            stats.parsed += 1
    return events, stats


# -- pcap ------------------------------------------------------------------

_PCAP_MAGIC_LE = 0xA1B2C3D4
_PCAP_MAGIC_BE = 0xD4C3B2A1


def write_pcap_trace(events: Sequence[TraceEvent], path: str | Path) -> None:
    """Write events as a little-endian pcap (Ethernet/IPv4).

    Payload bytes are not stored; incl_len covers headers only and
    orig_len reflects the true frame size, like a snaplen-limited capture.
    """
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(struct.pack("<IHHiIII", _PCAP_MAGIC_LE, 2, 4, 0, 0, 65535, 1))
        for ev in events:
            proto_num = {"TCP": 6, "UDP": 17}.get(ev.protocol)
            if proto_num is None:
                raise DataError(f"cannot write protocol {ev.protocol!r} to pcap")
            l4 = _tcp_header(ev) if proto_num == 6 else _udp_header(ev)
            ip_total = 20 + len(l4) + ev.payload_len
            ip = struct.pack(
                ">BBHHHBBH4s4s",
                0x45, 0, ip_total, 0, 0, 64, proto_num, 0,
                _ip_to_bytes(ev.src_ip), _ip_to_bytes(ev.dst_ip),
            )
            eth = b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00"
            frame = eth + ip + l4
            ts_sec, ts_usec = divmod(ev.ts_us, 1_000_000)
            fh.write(struct.pack("<IIII", ts_sec, ts_usec,
                                 len(frame), len(frame) + ev.payload_len))
            fh.write(frame)


def _tcp_header(ev: TraceEvent) -> bytes:
    return struct.pack(">HHIIBBHHH", ev.src_port, ev.dst_port,
                       0, 0, 5 << 4, 0x18, 65535, 0, 0)


def _udp_header(ev: TraceEvent) -> bytes:
    return struct.pack(">HHHH", ev.src_port, ev.dst_port,
                       8 + ev.payload_len, 0)


def _ip_to_bytes(ip: str) -> bytes:
    parts = ip.split(".")
    if len(parts) != 4:
        raise DataError(f"not an IPv4 address: {ip!r}")
    return bytes(int(p) for p in parts)


def parse_pcap_trace(path: str | Path) -> tuple[list[TraceEvent], ParseStats]:
    path = Path(path)
    data = path.read_bytes()
    stats = ParseStats()
    events: list[TraceEvent] = []
    if len(data) < 24:
        raise DataError(f"{path}: truncated pcap global header")
    magic = struct.unpack("<I", data[:4])[0]
    if magic == _PCAP_MAGIC_LE:
        endian = "<"
    elif magic == _PCAP_MAGIC_BE:
        endian = ">"
    else:
        raise DataError(f"{path}: unsupported pcap magic 0x{magic:08x}")
    network = struct.unpack(endian + "I", data[20:24])[0]
    if network != 1:
        raise DataError(f"{path}: unsupported link type {network}, need Ethernet")

    off = 24
    while off < len(data):
        if off + 16 > len(data):
            raise DataError(
                f"{path}: truncated record header at byte {off} "
                f"({stats.parsed} packets parsed before truncation)"
            )
        ts_sec, ts_usec, incl, orig = struct.unpack(
            endian + "IIII", data[off:off + 16])
        off += 16
        if off + incl > len(data):
            raise DataError(
                f"{path}: truncated packet record at byte {off} "
                f"({stats.parsed} packets parsed before truncation)"
            )
        frame = data[off:off + incl]
        off += incl
        stats.rows += 1
        ev = _parse_frame(frame, ts_sec * 1_000_000 + ts_usec, orig, stats)
        if ev is not None:
            events.append(ev)
            stats.parsed += 1
    return events, stats


def _parse_frame(frame: bytes, ts_us: int, orig_len: int,
                 stats: ParseStats) -> TraceEvent | None:
    if len(frame) < 14:
        stats.malformed += 1
        return None
    ethertype = struct.unpack(">H", frame[12:14])[0]
    if ethertype != 0x0800:
        stats.non_ipv4 += 1
        return None
    ip = frame[14:]
    if len(ip) < 20:
        stats.malformed += 1
        return None
    ver_ihl = ip[0]
    if ver_ihl >> 4 != 4:
        stats.non_ipv4 += 1
        return None
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or len(ip) < ihl:
        stats.malformed += 1
        return None
    total_len = struct.unpack(">H", ip[2:4])[0]
    flags_frag = struct.unpack(">H", ip[6:8])[0]
    if flags_frag & 0x1FFF:
        stats.fragments += 1
        return None
    proto = ip[9]
    src_ip = ".".join(str(b) for b in ip[12:16])
    dst_ip = ".".join(str(b) for b in ip[16:20])
    l4 = ip[ihl:]
    if proto == 6:
        if len(l4) < 20:
            stats.malformed += 1
            return None
        src_port, dst_port = struct.unpack(">HH", l4[:4])
        l4_len = (l4[12] >> 4) * 4
        if l4_len < 20:
            stats.malformed += 1
            return None
        name = "TCP"
    elif proto == 17:
        if len(l4) < 8:
            stats.malformed += 1
            return None
        src_port, dst_port = struct.unpack(">HH", l4[:4])
        l4_len = 8
        name = "UDP"
    else:
        stats.non_tcp_udp += 1
        return None
    payload = total_len - ihl - l4_len
    if payload < 0:
        stats.malformed += 1
        return None
    return TraceEvent(ts_us, src_ip, dst_ip, src_port, dst_port, name, payload)


# -- segmentation ----------------------------------------------------------


def segment_biflows(events: Sequence[TraceEvent],
                    rule: LabelRule) -> tuple[list[BiflowRecord], SegmentStats]:
    """Group packets into labelled biflows.

    One canonical 5-tuple yields one biflow per trace (no idle timeout).
    Biflows whose label cannot be determined are dropped and counted.
    Output order follows first appearance of each biflow in time.
    """
    stats = SegmentStats()
    ordered = sorted(events, key=lambda e: e.ts_us)  # stable for ties
    groups: dict[FlowKey, list[TraceEvent]] = {}
    for ev in ordered:
        stats.packets += 1
        if ev.payload_len < 1:
            stats.zero_payload += 1
            continue
        key = canonical_key(ev.src_ip, ev.dst_ip, ev.src_port,
                            ev.dst_port, ev.protocol)
        groups.setdefault(key, []).append(ev)

    labelled: list[tuple[FlowKey, list[TraceEvent], str]] = []
    names: set[str] = set()
    for key, evs in groups.items():
        name = _label_for(evs, key, rule, stats)
        if name is None:
            stats.unlabeled_biflows += 1
            continue
        labelled.append((key, evs, name))
        names.add(name)

    labels = make_label_space(sorted(names))
    by_name = {lab.name: lab for lab in labels}
    biflows: list[BiflowRecord] = []
    for key, evs, name in labelled:
        initiator = (evs[0].src_ip, evs[0].src_port)
        t0 = evs[0].ts_us
        packets = tuple(
            PacketEvent(
                payload_length=ev.payload_len,
                direction=Direction.UPSTREAM
                if (ev.src_ip, ev.src_port) == initiator
                else Direction.DOWNSTREAM,
                timestamp_us=ev.ts_us - t0,
            )
            for ev in evs
        )
        biflows.append(BiflowRecord(key, by_name[name], packets))
        stats.biflows += 1
    return biflows, stats


def _label_for(evs: list[TraceEvent], key: FlowKey, rule: LabelRule,
               stats: SegmentStats) -> str | None:
    if rule.mode == "fixed":
        return rule.fixed_label
    if rule.mode == "port":
        name = rule.port_map.get(key.port_lo)
        if name is None:
            name = rule.port_map.get(key.port_hi)
        return name
    # column mode: first packet's label wins, conflicts are counted
    name = None
    for ev in evs:
        if ev.label:
            if name is None:
                name = ev.label
            elif ev.label != name:
                stats.label_conflicts += 1
    return name


def extract_matrix(biflow: BiflowRecord, seq_len: int,
                   pl_max: int) -> TrafficMatrix:
    """First seq_len signed payload lengths, clamped to +/- pl_max."""
    values = []
    for pkt in biflow.packets[:seq_len]:
        pl = min(pkt.payload_length, pl_max)
        values.append(int(pkt.direction) * pl)
    padded = tuple(values) + (0,) * (seq_len - len(values))
    return TrafficMatrix(padded, len(values), biflow.label)


@dataclass
class IngestResult:
    corpus: Corpus
    parse_stats: ParseStats
    segment_stats: SegmentStats


def ingest_events(events: Sequence[TraceEvent], rule: LabelRule,
                  seq_len: int, pl_max: int,
                  parse_stats: ParseStats | None = None) -> IngestResult:
    biflows, seg = segment_biflows(events, rule)
    if not biflows:
        raise DataError("no labelled biflows with payload in trace")
    seg.truncated_biflows = sum(
        1 for b in biflows if len(b.packets) > seq_len)
    samples = tuple(extract_matrix(b, seq_len, pl_max) for b in biflows)
    space = tuple(sorted({s.label for s in samples}, key=lambda l: l.id))
    corpus = Corpus(space, samples, seq_len, pl_max, provenance="real")
    return IngestResult(corpus, parse_stats or ParseStats(), seg)


def ingest_trace(path: str | Path, kind: str, rule: LabelRule,
                 seq_len: int, pl_max: int) -> IngestResult:
    if kind == "csv":
        events, pstats = parse_csv_trace(path)
    elif kind == "pcap":
        events, pstats = parse_pcap_trace(path)
    else:
        raise DataError(f"unknown trace kind {kind!r}")
    return ingest_events(events, rule, seq_len, pl_max, pstats)
