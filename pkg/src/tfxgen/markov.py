"""Order-k Markov chain generator over token sequences.

One transition table per class.  Contexts are the k most recent tokens,
left-padded with PAD, starting from the class prompt; the next-token
alphabet is the signed value tokens plus EOS (never PAD or class tokens),
so V_next = 2 * pl_max + 1.  Rows are Laplace-smoothed at sampling time:

    P(t | ctx) = (count(ctx, t) + alpha) / (total(ctx) + alpha * V_next)

Unseen contexts therefore fall back to the uniform distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ClassLabel,
    ConfigError,
    Corpus,
    DataError,
    ModelError,
    stream_rng,
)
from .generate import GenerationStats
from .modelstore import load_model_raw, save_model
from .tokens import EOS_ID, PAD_ID, TokenSequence, Vocabulary, encode_tokens

MAX_SAMPLE_TRIES = 1000


class MarkovGenerator:
    """Per-class order-k transition tables with Laplace smoothing."""

    def __init__(self, vocab: Vocabulary, seq_len: int,
                 label_space: tuple[ClassLabel, ...], order: int,
                 alpha: float,
                 tables: dict[int, dict[tuple[int, ...], dict[int, int]]]):
        if order < 1:
            raise ConfigError(f"order must be >= 1, got {order}")
        if alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {alpha}")
        self.vocab = vocab
        self.seq_len = seq_len
        self.label_space = label_space
        self.order = order
        self.alpha = alpha
        self.tables = tables
        # next-token alphabet: value tokens in id order, then EOS
        self.next_ids = np.concatenate([
            np.arange(vocab.value_base, vocab.value_base + 2 * vocab.pl_max,
                      dtype=np.int64),
            np.array([EOS_ID], dtype=np.int64),
        ])
        self._slot = {int(t): i for i, t in enumerate(self.next_ids)}
        self._row_cache: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}

    # -- fitting -------------------------------------------------------------

    @classmethod
    def fit(cls, corpus: Corpus, order: int = 1,
            alpha: float = 0.001) -> "MarkovGenerator":
        vocab = Vocabulary(corpus.pl_max, corpus.n_classes)
        counts = corpus.class_counts()
        empty = [corpus.label_space[c].name for c, n in counts.items() if n == 0]
        if empty:
            raise DataError(f"classes without samples: {empty}")
        tables: dict[int, dict[tuple[int, ...], dict[int, int]]] = {
            lab.id: {} for lab in corpus.label_space
        }
        for sample in corpus.samples:
            seq = encode_tokens(sample, vocab)
            stream = [t for t in seq.ids if t != PAD_ID]  # CLASS, values, EOS
            table = tables[sample.label.id]
            for pos in range(1, len(stream)):
                ctx = _context(stream, pos, order)
                nxt = stream[pos]
                row = table.setdefault(ctx, {})
                row[nxt] = row.get(nxt, 0) + 1
        return cls(vocab, corpus.seq_len, corpus.label_space, order,
                   alpha, tables)

    # -- sampling ------------------------------------------------------------

    def next_distribution(self, class_id: int,
                          context: tuple[int, ...]) -> np.ndarray:
        """Smoothed P(next | context) aligned with self.next_ids."""
        if class_id not in self.tables:
            raise DataError(f"class id {class_id} not in model")
        if len(context) != self.order:
            raise DataError(
                f"context length {len(context)} != order {self.order}")
        key = (class_id, tuple(int(t) for t in context))
        row = self.tables[class_id].get(key[1], {})
        counts = np.zeros(len(self.next_ids), dtype=np.float64)
        for tok, c in row.items():
            slot = self._slot.get(int(tok))
            if slot is None:
                raise ModelError(f"table contains non-emittable token {tok}")
            counts[slot] = c
        v_next = len(self.next_ids)
        probs = (counts + self.alpha) / (counts.sum() + self.alpha * v_next)
        if key not in self._row_cache:
            cum = np.cumsum(probs)
            cum[-1] = 1.0  # guard against float drift at the top end
            self._row_cache[key] = cum
        return probs

    def _cum_row(self, class_id: int, context: tuple[int, ...]) -> np.ndarray:
        key = (class_id, context)
        cum = self._row_cache.get(key)
        if cum is None:
            self.next_distribution(class_id, context)
            cum = self._row_cache[key]
        return cum

    def sample(self, class_id: int, count: int, seed: int,
               stats: GenerationStats | None = None) -> list[TokenSequence]:
        """Draw `count` well-formed sequences for one class.

        Each sample gets its own rng stream keyed (seed, class_id, index);
        draws that terminate before emitting any value are rejected and
        retried on the same stream.
        """
        if not any(lab.id == class_id for lab in self.label_space):
            raise DataError(f"class id {class_id} not in label space")
        out: list[TokenSequence] = []
        for index in range(count):
            rng = stream_rng(seed, class_id, index)
            values = None
            for _ in range(MAX_SAMPLE_TRIES):
                if stats is not None:
                    stats.requested += 1
                drawn = self._draw_values(class_id, rng)
                if drawn:
                    values = drawn
                    break
                if stats is not None:
                    stats.rejected += 1
            if values is None:
                raise ModelError(
                    f"class {class_id}: no valid sample in "
                    f"{MAX_SAMPLE_TRIES} tries"
                )
            if stats is not None:
                stats.emitted += 1
            out.append(self._wrap(class_id, values))
        return out

    def _draw_values(self, class_id: int, rng: np.random.Generator) -> list[int]:
        stream = [self.vocab.class_token(class_id)]
        values: list[int] = []
        while len(values) < self.seq_len:
            ctx = _context(stream, len(stream), self.order)
            cum = self._cum_row(class_id, ctx)
            tok = int(self.next_ids[np.searchsorted(cum, rng.random(),
                                                    side="right")])
            if tok == EOS_ID:
                break
            stream.append(tok)
            values.append(self.vocab.token_value(tok))
        return values

    def _wrap(self, class_id: int, values: list[int]) -> TokenSequence:
        ids = [self.vocab.class_token(class_id)]
        ids.extend(self.vocab.value_token(v) for v in values)
        ids.append(EOS_ID)
        ids.extend([PAD_ID] * (self.seq_len + 2 - len(ids)))
        return TokenSequence(tuple(ids))

    # -- introspection / persistence ------------------------------------------

    def parameter_count(self) -> int:
        """Number of stored (context, next-token) count entries."""
        return sum(len(row) for table in self.tables.values()
                   for row in table.values())

    def save(self, path) -> None:
        tensors = []
        for class_id in sorted(self.tables):
            table = self.tables[class_id]
            ctxs = sorted(table.keys())
            ctx_arr = np.array(ctxs, dtype=np.int32).reshape(
                len(ctxs), self.order)
            indptr = np.zeros(len(ctxs) + 1, dtype=np.int64)
            toks: list[int] = []
            cnts: list[int] = []
            for i, ctx in enumerate(ctxs):
                row = table[ctx]
                for tok in sorted(row):
                    toks.append(tok)
                    cnts.append(row[tok])
                indptr[i + 1] = len(toks)
            tensors.append((f"ctx_{class_id}", ctx_arr))
            tensors.append((f"indptr_{class_id}", indptr))
            tensors.append((f"next_{class_id}",
                            np.array(toks, dtype=np.int32)))
            tensors.append((f"count_{class_id}",
                            np.array(cnts, dtype=np.int64)))
        save_model(
            path, "markov",
            vocab_info={
                "pl_max": self.vocab.pl_max,
                "n_classes": self.vocab.n_classes,
                "seq_len": self.seq_len,
                "labels": [lab.name for lab in self.label_space],
            },
            hyperparams={"order": self.order, "alpha": self.alpha},
            tensors=tensors,
        )

    @classmethod
    def from_raw(cls, raw: dict) -> "MarkovGenerator":
        if raw["kind"] != "markov":
            raise ModelError(f"expected markov model, got {raw['kind']!r}")
        voc = raw["vocab"]
        vocab = Vocabulary(int(voc["pl_max"]), int(voc["n_classes"]))
        labels = tuple(ClassLabel(i, n) for i, n in enumerate(voc["labels"]))
        order = int(raw["hyperparams"]["order"])
        alpha = float(raw["hyperparams"]["alpha"])
        tables: dict[int, dict[tuple[int, ...], dict[int, int]]] = {}
        for class_id in range(len(labels)):
            try:
                ctx_arr = raw["tensors"][f"ctx_{class_id}"]
                indptr = raw["tensors"][f"indptr_{class_id}"]
                toks = raw["tensors"][f"next_{class_id}"]
                cnts = raw["tensors"][f"count_{class_id}"]
            except KeyError as exc:
                raise ModelError(f"missing tensor for class {class_id}: {exc}")
            table: dict[tuple[int, ...], dict[int, int]] = {}
            for i in range(ctx_arr.shape[0]):
                ctx = tuple(int(t) for t in ctx_arr[i])
                row = {int(toks[j]): int(cnts[j])
                       for j in range(int(indptr[i]), int(indptr[i + 1]))}
                table[ctx] = row
            tables[class_id] = table
        return cls(vocab, int(voc["seq_len"]), labels, order, alpha, tables)

    @classmethod
    def load(cls, path) -> "MarkovGenerator":
        return cls.from_raw(load_model_raw(path))


def _context(stream: list[int], pos: int, order: int) -> tuple[int, ...]:
    ctx = stream[max(0, pos - order):pos]
    if len(ctx) < order:
        ctx = [PAD_ID] * (order - len(ctx)) + ctx
    return tuple(ctx)
