"""Synthetic ground-truth corpora and traces for demos and oracles.

Each toy class is a small first-order chain over six distinct signed
payload lengths with a per-step stop probability.  Classes use disjoint
value sets, so they are cleanly separable and every distributional
statistic has a closed form that tests can enumerate independently.

The trace writer turns a corpus back into an interleaved packet trace
(CSV or pcap) with handshake noise and unlabeled background flows, which
makes ingest(trace(corpus)) == corpus a meaningful end-to-end check.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import ClassLabel, ConfigError, Corpus, TrafficMatrix, stream_rng
from .ingest import TraceEvent

TOY_STOP_P = 0.08
_MAX_TOY_CLASSES = 12


def toy_label_space(n_classes: int) -> tuple[ClassLabel, ...]:
    if not 1 <= n_classes <= _MAX_TOY_CLASSES:
        raise ConfigError(
            f"toy corpora support 1..{_MAX_TOY_CLASSES} classes")
    return tuple(ClassLabel(c, f"app{c}") for c in range(n_classes))


def toy_chain(class_id: int) -> tuple[np.ndarray, np.ndarray, float]:
    """(state values, transition matrix, stop probability) for one class.

    State 0 is always upstream-positive so that a replayed trace has the
    client send the first payload.  Value sets never collide across
    classes and stay well inside the default +/-1460 range.
    """
    values = np.array([
        40 + 17 * class_id,
        -(300 + 31 * class_id),
        -(700 + 41 * class_id),
        120 + 23 * class_id,
        -(1000 + 13 * class_id),
        8 + 5 * class_id,
    ], dtype=np.int64)
    trans = np.array([
        [0.05, 0.55, 0.15, 0.10, 0.10, 0.05],
        [0.10, 0.05, 0.50, 0.15, 0.10, 0.10],
        [0.15, 0.10, 0.05, 0.45, 0.15, 0.10],
        [0.10, 0.15, 0.10, 0.05, 0.50, 0.10],
        [0.05, 0.10, 0.15, 0.10, 0.05, 0.55],
        [0.50, 0.10, 0.10, 0.15, 0.10, 0.05],
    ], dtype=np.float64)
    return values, trans, TOY_STOP_P


def _draw_toy_values(class_id: int, rng: np.random.Generator,
                     seq_len: int) -> list[int]:
    values, trans, stop_p = toy_chain(class_id)
    cum = np.cumsum(trans, axis=1)
    cum[:, -1] = 1.0
    state = 0
    out = [int(values[0])]
    while len(out) < seq_len:
        if rng.random() < stop_p:
            break
        state = int(np.searchsorted(cum[state], rng.random(), side="right"))
        out.append(int(values[state]))
    return out


def make_toy_corpus(counts: dict[int, int] | int, n_classes: int = 5,
                    seq_len: int = 10, pl_max: int = 1460,
                    seed: int = 0) -> Corpus:
    """Sample a labelled corpus; counts is per-class or one shared int."""
    labels = toy_label_space(n_classes)
    if isinstance(counts, int):
        counts = {lab.id: counts for lab in labels}
    samples: list[TrafficMatrix] = []
    for lab in labels:
        for i in range(counts.get(lab.id, 0)):
            rng = stream_rng(seed, lab.id, i)
            data = _draw_toy_values(lab.id, rng, seq_len)
            padded = tuple(data) + (0,) * (seq_len - len(data))
            samples.append(TrafficMatrix(padded, len(data), lab))
    return Corpus(labels, tuple(samples), seq_len, pl_max, provenance="real")


# -- trace replay -------------------------------------------------------------

_SERVER_IP = "192.168.0.10"
_SERVER_PORT = 443
_PKT_GAP_US = 2000
_FLOW_GAP_US = 5000  # < flow duration, so neighbouring flows interleave


def corpus_to_trace_events(corpus: Corpus,
                           with_noise: bool = True) -> list[TraceEvent]:
    """Replay a corpus as packet events, one TCP biflow per sample.

    Every flow opens with two zero-payload handshake packets, data
    packets alternate direction per the value signs, and a few unlabeled
    UDP background flows are mixed in when with_noise is set.
    """
    events: list[TraceEvent] = []
    for i, sample in enumerate(corpus.samples):
        client = f"10.{sample.label.id}.{i >> 8}.{i & 255}"
        sport = 20000 + (i % 40000)
        t0 = i * _FLOW_GAP_US
        name = sample.label.name
        events.append(TraceEvent(t0, client, _SERVER_IP, sport,
                                 _SERVER_PORT, "TCP", 0, name))
        events.append(TraceEvent(t0 + 10, _SERVER_IP, client, _SERVER_PORT,
                                 sport, "TCP", 0, name))
        for j, v in enumerate(sample.data_values):
            ts = t0 + 100 + j * _PKT_GAP_US
            if v > 0:
                events.append(TraceEvent(ts, client, _SERVER_IP, sport,
                                         _SERVER_PORT, "TCP", v, name))
            else:
                events.append(TraceEvent(ts, _SERVER_IP, client, _SERVER_PORT,
                                         sport, "TCP", -v, name))
    if with_noise:
        for k in range(3):
            src = f"172.16.9.{k + 1}"
            t0 = 137 + k * 9999
            events.append(TraceEvent(t0, src, "172.16.9.250", 5353 + k,
                                     53, "UDP", 64, None))
            events.append(TraceEvent(t0 + 500, "172.16.9.250", src, 53,
                                     5353 + k, "UDP", 128, None))
    return events


def write_demo_trace_csv(path: str | Path, corpus: Corpus,
                         with_noise: bool = True) -> int:
    """Write the replayed trace as labelled CSV; returns the row count."""
    events = corpus_to_trace_events(corpus, with_noise)
    events.sort(key=lambda e: e.ts_us)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ts_us", "src_ip", "dst_ip", "src_port",
                         "dst_port", "proto", "payload_len", "label"])
        for ev in events:
            writer.writerow([ev.ts_us, ev.src_ip, ev.dst_ip, ev.src_port,
                             ev.dst_port, ev.protocol, ev.payload_len,
                             ev.label or ""])
    return len(events)
