"""Token vocabulary and sequence codec for autoregressive generators.

A traffic matrix becomes a sequence of exactly L+2 integer ids:

    [CLASS_c, v_1, ..., v_n, EOS, PAD, ...]

Vocabulary layout (size 2*pl_max + N + 2):

    0                     PAD
    1                     EOS
    2 .. 2+N-1            class prompts
    2+N .. 2+N+pl_max-1   signed values -pl_max .. -1
    then pl_max more      signed values +1 .. +pl_max

Decoding is forgiving: generation stops at the first EOS/PAD or stray
class token after the prompt, surplus value tokens past L are cut, and
such fixes are reported as repairs.  Sequences with no value tokens or
with ids outside the vocabulary are rejected outright.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    ClassLabel,
    Corpus,
    DataError,
    RejectedSample,
    TrafficMatrix,
    matrix_from_values,
)

PAD_ID = 0
EOS_ID = 1

TOKENS_FORMAT = "tfx-tokens/1"


@dataclass(frozen=True)
class Vocabulary:
    pl_max: int
    n_classes: int

    def __post_init__(self):
        if self.pl_max < 1:
            raise DataError("pl_max must be >= 1")
        if self.n_classes < 1:
            raise DataError("need at least one class")

    @property
    def size(self) -> int:
        return 2 * self.pl_max + self.n_classes + 2

    @property
    def value_base(self) -> int:
        return 2 + self.n_classes

    def class_token(self, class_id: int) -> int:
        if not 0 <= class_id < self.n_classes:
            raise DataError(f"class id {class_id} out of range")
        return 2 + class_id

    def value_token(self, value: int) -> int:
        if not 1 <= abs(value) <= self.pl_max:
            raise DataError(
                f"signed value {value} outside [-{self.pl_max}, -1] u [1, {self.pl_max}]"
            )
        if value < 0:
            return self.value_base + (value + self.pl_max)
        return self.value_base + self.pl_max + (value - 1)

    def token_kind(self, token: int) -> str:
        if token == PAD_ID:
            return "pad"
        if token == EOS_ID:
            return "eos"
        if 2 <= token < self.value_base:
            return "class"
        if self.value_base <= token < self.size:
            return "value"
        return "invalid"

    def token_value(self, token: int) -> int:
        off = token - self.value_base
        if not 0 <= off < 2 * self.pl_max:
            raise DataError(f"token {token} is not a value token")
        if off < self.pl_max:
            return off - self.pl_max
        return off - self.pl_max + 1

    def token_class(self, token: int) -> int:
        if self.token_kind(token) != "class":
            raise DataError(f"token {token} is not a class token")
        return token - 2


@dataclass(frozen=True)
class TokenSequence:
    """A fixed-length token id sequence, always L+2 long."""

    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


def encode_tokens(matrix: TrafficMatrix, vocab: Vocabulary) -> TokenSequence:
    """Canonical encoding: class prompt, values, EOS, PAD to L+2."""
    seq_len = matrix.seq_len
    ids = [vocab.class_token(matrix.label.id)]
    ids.extend(vocab.value_token(v) for v in matrix.data_values)
    ids.append(EOS_ID)
    ids.extend([PAD_ID] * (seq_len + 2 - len(ids)))
    return TokenSequence(tuple(ids))


def decode_tokens(ids: Sequence[int], vocab: Vocabulary, seq_len: int,
                  label_space: Sequence[ClassLabel]) -> tuple[TrafficMatrix, bool]:
    """Decode ids into a matrix; returns (matrix, repaired).

    Raises RejectedSample when no valid matrix can be recovered (missing
    or misplaced class prompt, no value tokens, out-of-vocabulary id).
    """
    ids = [int(t) for t in ids]
    for t in ids:
        if vocab.token_kind(t) == "invalid":
            raise RejectedSample(f"token id {t} outside vocabulary")
    if not ids or vocab.token_kind(ids[0]) != "class":
        raise RejectedSample("sequence must start with a class token")
    class_id = vocab.token_class(ids[0])
    if class_id >= len(label_space):
        raise RejectedSample(f"class id {class_id} outside label space")

    values: list[int] = []
    for t in ids[1:]:
        kind = vocab.token_kind(t)
        if kind == "value":
            if len(values) == seq_len:
                break  # surplus data past L, cut it
            values.append(vocab.token_value(t))
        else:
            break  # EOS, PAD or stray class prompt ends the body
    if not values:
        raise RejectedSample("no payload values before end of sequence")

    matrix = matrix_from_values(values, seq_len, label_space[class_id])
    canonical = encode_tokens(matrix, vocab)
    repaired = tuple(ids) != canonical.ids
    return matrix, repaired


def corpus_to_sequences(corpus: Corpus, vocab: Vocabulary) -> list[TokenSequence]:
    return [encode_tokens(s, vocab) for s in corpus.samples]


# -- token files (the import/export bridge) ---------------------------------


def write_token_file(path: str | Path, sequences: Iterable[TokenSequence],
                     vocab: Vocabulary, seq_len: int) -> None:
    path = Path(path)
    header = {
        "format": TOKENS_FORMAT,
        "vocab": {"pl_max": vocab.pl_max, "N": vocab.n_classes, "L": seq_len},
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for seq in sequences:
            fh.write(" ".join(str(t) for t in seq.ids) + "\n")


def read_token_file(path: str | Path) -> tuple[list[list[int]], dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty token file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: invalid JSON header ({exc.msg})") from exc
    if not isinstance(header, dict) or header.get("format") != TOKENS_FORMAT:
        raise DataError(f"{path}: not a {TOKENS_FORMAT} file")
    voc = header.get("vocab")
    if not isinstance(voc, dict) or \
            not {"pl_max", "N", "L"} <= set(voc.keys()):
        raise DataError(f"{path}: header vocab must carry pl_max, N and L")
    rows: list[list[int]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            rows.append([int(tok) for tok in raw.split()])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer token id") from None
    return rows, header


@dataclass
class ImportStats:
    lines: int = 0
    imported: int = 0
    repaired: int = 0
    rejected: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def import_external(path: str | Path, vocab: Vocabulary, seq_len: int,
                    label_space: Sequence[ClassLabel]) -> tuple[Corpus, ImportStats]:
    """Load externally produced token sequences as a synthetic corpus.

    The file header must match the expected vocabulary exactly; rows that
    cannot be decoded are dropped and counted, repaired rows are kept.
    """
    rows, header = read_token_file(path)
    voc = header["vocab"]
    expected = {"pl_max": vocab.pl_max, "N": vocab.n_classes, "L": seq_len}
    mismatched = {k: (voc[k], expected[k]) for k in expected
                  if int(voc[k]) != expected[k]}
    if mismatched:
        detail = ", ".join(f"{k}: file has {a}, expected {b}"
                           for k, (a, b) in sorted(mismatched.items()))
        raise DataError(f"{path}: vocabulary mismatch ({detail})")
    stats = ImportStats()
    samples: list[TrafficMatrix] = []
    for row in rows:
        stats.lines += 1
        try:
            matrix, repaired = decode_tokens(row, vocab, seq_len, label_space)
        except RejectedSample:
            stats.rejected += 1
            continue
        samples.append(matrix)
        stats.imported += 1
        if repaired:
            stats.repaired += 1
    if not samples:
        raise DataError(f"{path}: no decodable token sequences")
    corpus = Corpus(tuple(label_space), tuple(samples), seq_len,
                    vocab.pl_max, provenance="synthetic")
    return corpus, stats
