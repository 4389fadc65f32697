"""Shared driver for drawing synthetic corpora out of fitted generators.

Both generator families expose the same sampling surface: a vocabulary,
a label space, a sequence length, and

    sample(class_id, count, seed, stats=None) -> list[TokenSequence]

Per-sample randomness is keyed by (seed, class_id, sample_index), so any
sample can be regenerated in isolation and results never depend on the
order classes are drawn in.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import Corpus, DataError
from .tokens import decode_tokens


@dataclass
class GenerationStats:
    requested: int = 0
    emitted: int = 0
    rejected: int = 0
    repaired: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def merge(self, other: "GenerationStats") -> None:
        self.requested += other.requested
        self.emitted += other.emitted
        self.rejected += other.rejected
        self.repaired += other.repaired


def generate_corpus(generator, counts: dict[int, int],
                    seed: int) -> tuple[Corpus, GenerationStats]:
    """Draw `counts[class_id]` samples per class into a synthetic corpus."""
    label_space = generator.label_space
    known = {lab.id for lab in label_space}
    bad = sorted(set(counts) - known)
    if bad:
        raise DataError(f"unknown class ids requested: {bad}")
    stats = GenerationStats()
    samples = []
    for class_id in sorted(counts):
        n = int(counts[class_id])
        if n < 0:
            raise DataError(f"negative sample count for class {class_id}")
        if n == 0:
            continue
        seqs = generator.sample(class_id, n, seed, stats=stats)
        for seq in seqs:
            matrix, _ = decode_tokens(seq.ids, generator.vocab,
                                      generator.seq_len, label_space)
            samples.append(matrix)
    corpus = Corpus(tuple(label_space), tuple(samples), generator.seq_len,
                    generator.vocab.pl_max, provenance="synthetic")
    return corpus, stats
