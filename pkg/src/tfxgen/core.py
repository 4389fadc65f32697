"""Core value types for the traffic synthesis workbench.

Everything downstream (ingestion, generators, metrics, classifiers) speaks
in terms of the types defined here: labelled biflows, fixed-length signed
payload-length vectors, and corpora thereof.  Conventions:

* payload lengths are transport payload bytes, always >= 1 after filtering;
  zero-payload packets (pure ACKs, handshakes) never reach a TrafficMatrix
* direction is encoded in the sign: upstream (same direction as the biflow
  initiator) is positive, downstream negative
* a TrafficMatrix holds exactly `seq_len` slots, the first `effective_length`
  carry data, the rest are zero sentinels
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

DEFAULT_SEQ_LEN = 10
DEFAULT_PL_MAX = 1460

PROVENANCE_KINDS = ("real", "synthetic", "augmented")

# Fixed stream tags so independent RNG consumers never share a stream.
STREAM_SPLIT = 101
STREAM_EPOCH = 102
STREAM_INIT = 103
STREAM_SUBSET = 104
STREAM_AUGMENT = 105
STREAM_TREE = 106
STREAM_LATENCY = 107


class WorkbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WorkbenchError):
    """Invalid configuration or hyperparameters."""


class DataError(WorkbenchError):
    """Malformed input data, file format violations, label mismatches."""


class ModelError(WorkbenchError):
    """Model training or deserialization failure."""


class RejectedSample(WorkbenchError):
    """A generated or imported sample could not be decoded into a valid matrix."""


class Direction(IntEnum):
    """Packet direction relative to the biflow initiator.

    The integer value doubles as the sign multiplier applied to payload
    lengths, so ``direction * payload_length`` yields the signed value.
    """

    UPSTREAM = 1
    DOWNSTREAM = -1


def stream_rng(*entropy: int) -> np.random.Generator:
    """Derive an independent generator from a tuple of non-negative ints.

    All randomness in the package flows through here so that every consumer
    (split, per-tree bootstrap, per-sample generation, ...) gets its own
    stream keyed by purpose, and results do not depend on call order.
    """
    ent = []
    for e in entropy:
        e = int(e)
        if e < 0:
            raise ConfigError(f"rng stream entropy must be non-negative, got {e}")
        ent.append(e)
    return np.random.default_rng(np.random.SeedSequence(ent))


def derive_seed(*entropy: int) -> int:
    """Collapse a stream key into a single int seed for APIs that take one."""
    ent = [int(e) for e in entropy]
    if any(e < 0 for e in ent):
        raise ConfigError("seed entropy must be non-negative")
    return int(np.random.SeedSequence(ent).generate_state(1)[0])


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, order=True)
class ClassLabel:
    """A traffic class: dense integer id plus human-readable name."""

    id: int
    name: str

    def __post_init__(self):
        if self.id < 0:
            raise DataError(f"class id must be >= 0, got {self.id}")
        if not self.name:
            raise DataError("class name must be non-empty")


def make_label_space(names: Sequence[str]) -> tuple[ClassLabel, ...]:
    """Build a dense label space (ids 0..N-1) from unique names, in order."""
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if list(names).count(n) > 1})
        raise DataError(f"duplicate class names: {dupes}")
    return tuple(ClassLabel(i, n) for i, n in enumerate(names))


@dataclass(frozen=True)
class PacketEvent:
    """One packet inside a biflow, after zero-payload filtering."""

    payload_length: int
    direction: Direction
    timestamp_us: int

    def __post_init__(self):
        if self.payload_length < 1:
            raise DataError(
                f"payload_length must be >= 1, got {self.payload_length}"
            )

    @property
    def signed_length(self) -> int:
        return int(self.direction) * self.payload_length


@dataclass(frozen=True)
class FlowKey:
    """Canonical bidirectional 5-tuple.

    Endpoints are ordered so that both directions of the same conversation
    map to the same key: the (ip, port) pair that sorts lexicographically
    first becomes (ip_lo, port_lo).
    """

    ip_lo: str
    ip_hi: str
    port_lo: int
    port_hi: int
    protocol: str


def canonical_key(src_ip: str, dst_ip: str, src_port: int, dst_port: int,
                  protocol: str) -> FlowKey:
    a = (src_ip, src_port)
    b = (dst_ip, dst_port)
    if a <= b:
        return FlowKey(a[0], b[0], a[1], b[1], protocol)
    return FlowKey(b[0], a[0], b[1], a[1], protocol)


@dataclass(frozen=True)
class BiflowRecord:
    """A labelled bidirectional flow: canonical key plus its packet events.

    Packets are stored in arrival order; direction is relative to the
    initiator (the source of the first packet with payload).
    """

    key: FlowKey
    label: ClassLabel
    packets: tuple[PacketEvent, ...]

    def __post_init__(self):
        if not self.packets:
            raise DataError("biflow must contain at least one packet")
        if self.packets[0].direction is not Direction.UPSTREAM:
            raise DataError("first packet of a biflow defines upstream")


@dataclass(frozen=True)
class TrafficMatrix:
    """Fixed-length signed payload-length vector for one biflow.

    ``values`` has exactly ``seq_len`` entries.  Positions in
    ``[0, effective_length)`` hold signed payload lengths (never zero),
    the remainder are zero sentinels.
    """

    values: tuple[int, ...]
    effective_length: int
    label: ClassLabel

    def __post_init__(self):
        n = len(self.values)
        eff = self.effective_length
        if not 1 <= eff <= n:
            raise DataError(
                f"effective_length {eff} out of range [1, {n}]"
            )
        for i, v in enumerate(self.values):
            if i < eff and v == 0:
                raise DataError(f"zero value inside data region at position {i}")
            if i >= eff and v != 0:
                raise DataError(f"non-zero value in padding at position {i}")

    @property
    def seq_len(self) -> int:
        return len(self.values)

    @property
    def data_values(self) -> tuple[int, ...]:
        return self.values[: self.effective_length]


def matrix_from_values(data: Sequence[int], seq_len: int,
                       label: ClassLabel) -> TrafficMatrix:
    """Pad a raw signed-value sequence to seq_len and wrap it."""
    data = tuple(int(v) for v in data)
    if not 1 <= len(data) <= seq_len:
        raise DataError(
            f"need between 1 and {seq_len} values, got {len(data)}"
        )
    padded = data + (0,) * (seq_len - len(data))
    return TrafficMatrix(padded, len(data), label)


@dataclass(frozen=True)
class Corpus:
    """A set of TrafficMatrix samples under one label space.

    ``provenance`` records how the samples came to be; it is carried
    in memory only and never changes metric or model behaviour.
    """

    label_space: tuple[ClassLabel, ...]
    samples: tuple[TrafficMatrix, ...]
    seq_len: int
    pl_max: int
    provenance: str = "real"

    def __post_init__(self):
        if self.provenance not in PROVENANCE_KINDS:
            raise DataError(f"unknown provenance {self.provenance!r}")
        if self.pl_max < 1:
            raise DataError("pl_max must be >= 1")
        if self.seq_len < 1:
            raise DataError("seq_len must be >= 1")
        ids = [lab.id for lab in self.label_space]
        if ids != list(range(len(ids))):
            raise DataError(f"label ids must be dense 0..N-1, got {ids}")
        names = [lab.name for lab in self.label_space]
        if len(set(names)) != len(names):
            raise DataError("label names must be unique")
        for s in self.samples:
            if s.seq_len != self.seq_len:
                raise DataError(
                    f"sample seq_len {s.seq_len} != corpus seq_len {self.seq_len}"
                )
            if s.label.id >= len(self.label_space) or \
                    self.label_space[s.label.id] != s.label:
                raise DataError(f"sample label {s.label} not in label space")
            for v in s.data_values:
                if abs(v) > self.pl_max:
                    raise DataError(
                        f"value {v} exceeds pl_max {self.pl_max}"
                    )

    @property
    def n_classes(self) -> int:
        return len(self.label_space)

    def class_counts(self) -> dict[int, int]:
        counts = {lab.id: 0 for lab in self.label_space}
        for s in self.samples:
            counts[s.label.id] += 1
        return counts

    def samples_of(self, class_id: int) -> tuple[TrafficMatrix, ...]:
        return tuple(s for s in self.samples if s.label.id == class_id)

    def with_samples(self, samples: Iterable[TrafficMatrix],
                     provenance: str | None = None) -> "Corpus":
        return replace(
            self,
            samples=tuple(samples),
            provenance=self.provenance if provenance is None else provenance,
        )


def split_corpus(corpus: Corpus, train_fraction: float,
                 seed: int) -> tuple[Corpus, Corpus]:
    """Stratified split into (train, test), deterministic in the seed.

    Each class contributes round-half-up(train_fraction * n_c) samples to
    the train side.  Classes with fewer than two samples cannot be split.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(
            f"train_fraction must be in (0, 1), got {train_fraction}"
        )
    rng = stream_rng(seed, STREAM_SPLIT)
    by_class: dict[int, list[int]] = {lab.id: [] for lab in corpus.label_space}
    for i, s in enumerate(corpus.samples):
        by_class[s.label.id].append(i)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for lab in corpus.label_space:
        idx = by_class[lab.id]
        if len(idx) < 2:
            raise DataError(
                f"class {lab.name!r} has {len(idx)} sample(s); need >= 2 to split"
            )
        n_train = round_half_up(train_fraction * len(idx))
        perm = rng.permutation(len(idx))
        chosen = sorted(idx[j] for j in perm[:n_train])
        rest = sorted(idx[j] for j in perm[n_train:])
        train_idx.extend(chosen)
        test_idx.extend(rest)
    train_idx.sort()
    test_idx.sort()
    train = corpus.with_samples(corpus.samples[i] for i in train_idx)
    test = corpus.with_samples(corpus.samples[i] for i in test_idx)
    return train, test
