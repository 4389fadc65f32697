"""Distributional fidelity metrics between a real and a synthetic corpus.

Four per-class divergences, each a Jensen-Shannon distance in bits
(base-2 logs, so every value lives in [0, 1]):

    jsd_num_packets   over the distribution of effective lengths
    jsd_1gram         over single signed values (data positions only)
    jsd_2gram         over adjacent signed value pairs
    jsd_markov        mean row-wise JSD between first-order transition
                      matrices on the union of observed values; rows with
                      no outgoing transitions are treated as uniform

plus two corpus-level diversity numbers:

    uniq_align        |uniq(real) - uniq(synth)| where uniq is the share
                      of distinct (label, values) rows
    leakage           Jaccard overlap between the distinct row sets

Macro scores average per-class values over the classes present in the
real corpus; a class the synthetic corpus misses scores 1.0 across the
board.  Comparing a corpus against itself yields the signature
(0, 0, 0, 0) with uniq_align 0 and leakage 1.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import Corpus, DataError, TrafficMatrix

METRIC_NAMES = ("jsd_num_packets", "jsd_1gram", "jsd_2gram", "jsd_markov")


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, base 2, between two distributions.

    Accepts either two equal-length probability arrays over the same
    support, or two {outcome: probability} mappings (aligned on the
    union of their keys).
    """
    if isinstance(p, Mapping) or isinstance(q, Mapping):
        if not (isinstance(p, Mapping) and isinstance(q, Mapping)):
            raise DataError("cannot mix mapping and array distributions")
        keys = sorted(set(p) | set(q))
        pa = np.array([p.get(k, 0.0) for k in keys], dtype=np.float64)
        qa = np.array([q.get(k, 0.0) for k in keys], dtype=np.float64)
    else:
        pa = np.asarray(p, dtype=np.float64)
        qa = np.asarray(q, dtype=np.float64)
        if pa.shape != qa.shape or pa.ndim != 1:
            raise DataError(
                f"distributions must share a support, got shapes "
                f"{pa.shape} and {qa.shape}"
            )
    for name, arr in (("p", pa), ("q", qa)):
        if arr.size == 0:
            raise DataError(f"distribution {name} is empty")
        if np.any(arr < 0):
            raise DataError(f"distribution {name} has negative mass")
        if abs(arr.sum() - 1.0) > 1e-6:
            raise DataError(
                f"distribution {name} sums to {arr.sum()!r}, expected 1")
    m = 0.5 * (pa + qa)

    def _kl_to_mid(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    val = 0.5 * _kl_to_mid(pa) + 0.5 * _kl_to_mid(qa)
    return min(max(val, 0.0), 1.0)


# -- per-class statistics ----------------------------------------------------


def packet_count_histogram(samples: Sequence[TrafficMatrix]) -> dict[int, float]:
    counts: dict[int, int] = {}
    for s in samples:
        counts[s.effective_length] = counts.get(s.effective_length, 0) + 1
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def value_ngram_histogram(samples: Sequence[TrafficMatrix],
                          n: int) -> dict[tuple, float]:
    """Distribution of n-grams of signed values inside the data region."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    counts: dict[tuple, int] = {}
    for s in samples:
        data = s.data_values
        for i in range(len(data) - n + 1):
            gram = data[i:i + n]
            counts[gram] = counts.get(gram, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in counts.items()}


def transition_matrix(samples: Sequence[TrafficMatrix],
                      states: Sequence[int] | None = None
                      ) -> tuple[tuple[int, ...], np.ndarray]:
    """First-order transition matrix over signed values.

    Row-normalised counts of adjacent value pairs; a state with no
    outgoing transitions gets a uniform row so every row is a
    distribution.
    """
    if states is None:
        seen: set[int] = set()
        for s in samples:
            seen.update(s.data_values)
        states = sorted(seen)
    states = tuple(states)
    if not states:
        raise DataError("no states to build a transition matrix over")
    index = {v: i for i, v in enumerate(states)}
    counts = np.zeros((len(states), len(states)), dtype=np.float64)
    for s in samples:
        data = s.data_values
        for i in range(len(data) - 1):
            a, b = data[i], data[i + 1]
            if a in index and b in index:
                counts[index[a], index[b]] += 1
    rows = counts.sum(axis=1)
    out = np.empty_like(counts)
    uniform = 1.0 / len(states)
    for i in range(len(states)):
        out[i] = counts[i] / rows[i] if rows[i] > 0 else uniform
    return states, out


def jsd_markov(matrix_a: np.ndarray, matrix_b: np.ndarray) -> float:
    """Unweighted mean of row-wise JSDs between two transition matrices."""
    a = np.asarray(matrix_a, dtype=np.float64)
    b = np.asarray(matrix_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(
            f"transition matrices must share a square shape, got "
            f"{a.shape} and {b.shape}"
        )
    return float(np.mean([jsd(a[i], b[i]) for i in range(a.shape[0])]))


def _class_metric(real: Sequence[TrafficMatrix],
                  synth: Sequence[TrafficMatrix], metric: str) -> float:
    if metric == "jsd_num_packets":
        return jsd(packet_count_histogram(real), packet_count_histogram(synth))
    if metric == "jsd_1gram":
        return jsd(value_ngram_histogram(real, 1), value_ngram_histogram(synth, 1))
    if metric == "jsd_2gram":
        hr = value_ngram_histogram(real, 2)
        hs = value_ngram_histogram(synth, 2)
        if not hr and not hs:
            return 0.0  # neither side has any adjacent pair
        if not hr or not hs:
            return 1.0
        return jsd(hr, hs)
    if metric == "jsd_markov":
        union: set[int] = set()
        for s in list(real) + list(synth):
            union.update(s.data_values)
        states = tuple(sorted(union))
        _, mr = transition_matrix(real, states)
        _, ms = transition_matrix(synth, states)
        return jsd_markov(mr, ms)
    raise DataError(f"unknown metric {metric!r}")


# -- corpus-level ------------------------------------------------------------


def _distinct_rows(corpus: Corpus) -> set[tuple]:
    return {(s.label.id, s.values) for s in corpus.samples}


def uniq_align(real: Corpus, synth: Corpus) -> float:
    """Absolute gap between the two corpora's distinct-row shares."""
    ur = len(_distinct_rows(real)) / len(real.samples)
    us = len(_distinct_rows(synth)) / len(synth.samples)
    return abs(ur - us)


def leakage(real: Corpus, synth: Corpus) -> float:
    """Jaccard overlap of distinct (label, values) rows; 1 = pure copying."""
    r = _distinct_rows(real)
    s = _distinct_rows(synth)
    union = r | s
    if not union:
        raise DataError("both corpora are empty")
    return len(r & s) / len(union)


def _check_comparable(real: Corpus, synth: Corpus) -> None:
    if not real.samples:
        raise DataError("real corpus has no samples")
    if not synth.samples:
        raise DataError("synthetic corpus has no samples")
    if real.label_space != synth.label_space:
        rn = [lab.name for lab in real.label_space]
        sn = [lab.name for lab in synth.label_space]
        only_r = sorted(set(rn) - set(sn))
        only_s = sorted(set(sn) - set(rn))
        raise DataError(
            f"label spaces differ (only in real: {only_r}, only in "
            f"synthetic: {only_s}, order matters)"
        )
    if real.seq_len != synth.seq_len or real.pl_max != synth.pl_max:
        raise DataError(
            f"corpus shapes differ: L {real.seq_len} vs {synth.seq_len}, "
            f"pl_max {real.pl_max} vs {synth.pl_max}"
        )


@dataclass
class FidelityReport:
    per_class: dict[str, dict[str, float]]
    macro: dict[str, float]
    n_real: int
    n_synth: int
    missing_classes: list[str]
    generation: dict | None = None

    def to_dict(self) -> dict:
        return {
            "per_class": self.per_class,
            "macro": self.macro,
            "n_real": self.n_real,
            "n_synth": self.n_synth,
            "missing_classes": self.missing_classes,
            "generation": self.generation,
        }


def build_fidelity_report(real: Corpus, synth: Corpus,
                          generation: dict | None = None) -> FidelityReport:
    """Full six-metric comparison of a synthetic corpus against a real one."""
    _check_comparable(real, synth)
    real_by_class = {lab.id: real.samples_of(lab.id)
                     for lab in real.label_space}
    synth_by_class = {lab.id: synth.samples_of(lab.id)
                      for lab in synth.label_space}
    per_class: dict[str, dict[str, float]] = {}
    missing: list[str] = []
    macro_acc = {m: [] for m in METRIC_NAMES}
    for lab in real.label_space:
        if not real_by_class[lab.id]:
            continue  # macro averages only over classes present in real
        if not synth_by_class[lab.id]:
            row = {m: 1.0 for m in METRIC_NAMES}
            missing.append(lab.name)
        else:
            row = {m: _class_metric(real_by_class[lab.id],
                                    synth_by_class[lab.id], m)
                   for m in METRIC_NAMES}
        per_class[lab.name] = row
        for m in METRIC_NAMES:
            macro_acc[m].append(row[m])
    if not any(macro_acc[m] for m in METRIC_NAMES):
        raise DataError("no classes present in the real corpus")
    macro = {m: float(np.mean(macro_acc[m])) for m in METRIC_NAMES}
    macro["uniq_align"] = uniq_align(real, synth)
    macro["leakage"] = leakage(real, synth)
    return FidelityReport(per_class, macro, len(real.samples),
                          len(synth.samples), missing, generation)


def write_fidelity_json(report: FidelityReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_fidelity_csv(report: FidelityReport, path: str | Path) -> None:
    """One row per class plus a trailing macro row.

    The corpus-level columns (uniq_align, leakage) are only defined on
    the macro row and stay empty elsewhere.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class"] + list(METRIC_NAMES)
                        + ["uniq_align", "leakage"])
        for name in report.per_class:
            row = report.per_class[name]
            writer.writerow([name] + [f"{row[m]:.6f}" for m in METRIC_NAMES]
                            + ["", ""])
        writer.writerow(
            ["macro"]
            + [f"{report.macro[m]:.6f}" for m in METRIC_NAMES]
            + [f"{report.macro['uniq_align']:.6f}",
               f"{report.macro['leakage']:.6f}"]
        )
