"""Baseline augmenters that mint variants of real samples.

Both operate directly on traffic matrices and never change the label or
the value range, so augmented corpora satisfy the same invariants as real
ones.  Randomness is keyed per minted sample, like the generators.
"""
from __future__ import annotations

import numpy as np

from .core import (
    STREAM_AUGMENT,
    ConfigError,
    DataError,
    TrafficMatrix,
    stream_rng,
)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def smote_interpolate(base: TrafficMatrix, neighbor: TrafficMatrix,
                      lam: float, pl_max: int) -> TrafficMatrix:
    """Interpolate two same-class, same-length matrices position-wise.

    Values are rounded half away from zero, clamped to +/- pl_max, and
    pushed off zero (toward the sign of the unrounded value, or the
    base's sign when the interpolation lands exactly on zero).
    """
    if base.label != neighbor.label:
        raise DataError("cannot interpolate across classes")
    if base.effective_length != neighbor.effective_length:
        raise DataError("cannot interpolate across effective lengths")
    eff = base.effective_length
    a = np.array(base.values[:eff], dtype=np.float64)
    b = np.array(neighbor.values[:eff], dtype=np.float64)
    raw = a + lam * (b - a)
    v = _round_half_away(raw)
    v = np.clip(v, -pl_max, pl_max)
    sign_src = np.where(raw != 0.0, np.sign(raw), np.sign(a))
    v = np.where(v == 0.0, sign_src, v)
    padded = tuple(int(x) for x in v) + (0,) * (base.seq_len - eff)
    return TrafficMatrix(padded, eff, base.label)


def smote_generate(samples: list[TrafficMatrix], count: int, seed: int,
                   pl_max: int, k: int = 5) -> list[TrafficMatrix]:
    """Mint `count` interpolated samples from one class's matrices.

    For each new sample a base is picked uniformly; its k nearest
    neighbours (Euclidean, among same-effective-length samples, ties by
    sample index) provide the partner; lambda ~ U(0, 1).  A base with no
    same-length neighbour is replicated unchanged.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if not samples:
        raise DataError("need at least one sample to augment")
    labels = {s.label for s in samples}
    if len(labels) > 1:
        raise DataError("smote_generate expects samples of a single class")
    vectors = np.array([s.values for s in samples], dtype=np.float64)
    eff = np.array([s.effective_length for s in samples])

    neighbor_cache: dict[int, list[int]] = {}

    def neighbors_of(i: int) -> list[int]:
        got = neighbor_cache.get(i)
        if got is not None:
            return got
        same = np.nonzero(eff == eff[i])[0]
        same = same[same != i]
        if same.size == 0:
            neighbor_cache[i] = []
            return []
        d = np.sum((vectors[same] - vectors[i]) ** 2, axis=1)
        order = sorted(range(same.size), key=lambda j: (d[j], same[j]))
        chosen = [int(same[j]) for j in order[:k]]
        neighbor_cache[i] = chosen
        return chosen

    out: list[TrafficMatrix] = []
    for index in range(count):
        rng = stream_rng(seed, STREAM_AUGMENT, index)
        i = int(rng.integers(len(samples)))
        cand = neighbors_of(i)
        if not cand:
            out.append(samples[i])
            continue
        j = cand[int(rng.integers(len(cand)))]
        lam = float(rng.random())
        out.append(smote_interpolate(samples[i], samples[j], lam, pl_max))
    return out


def fast_retransmit(matrix: TrafficMatrix, p: float, seed: int = 0,
                    rng: np.random.Generator | None = None) -> TrafficMatrix:
    """With probability p, duplicate one value in place.

    A position i is drawn uniformly from the data region and values[i]
    is inserted again right after i, shifting the tail; anything pushed
    past the matrix length is cut.  Mimics a retransmitted segment
    showing up next to the original.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must be in [0, 1], got {p}")
    if rng is None:
        rng = stream_rng(seed, STREAM_AUGMENT)
    if rng.random() >= p:
        return matrix
    eff = matrix.effective_length
    seq_len = matrix.seq_len
    i = int(rng.integers(eff))
    data = list(matrix.values[:eff])
    data.insert(i + 1, data[i])
    data = data[:seq_len]
    padded = tuple(data) + (0,) * (seq_len - len(data))
    return TrafficMatrix(padded, len(data), matrix.label)


def fast_retransmit_generate(samples: list[TrafficMatrix], count: int,
                             seed: int, p: float = 1.0) -> list[TrafficMatrix]:
    """Mint `count` samples by duplicating a packet of a random base."""
    if not samples:
        raise DataError("need at least one sample to augment")
    out: list[TrafficMatrix] = []
    for index in range(count):
        rng = stream_rng(seed, STREAM_AUGMENT, index)
        base = samples[int(rng.integers(len(samples)))]
        out.append(fast_retransmit(base, p, rng=rng))
    return out
