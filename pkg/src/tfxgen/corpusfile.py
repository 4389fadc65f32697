"""Line-delimited JSON corpus files (format tag "tfx-corpus/1").

First line is a header object, every following line one sample:

    {"format":"tfx-corpus/1","L":10,"pl_max":1460,"labels":["dns","web"]}
    {"label":"web","len":3,"pl":[120,-1460,-1460,0,0,0,0,0,0,0]}

Writing is canonical (fixed key order, no whitespace) so that
write(read(f)) reproduces f byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .core import Corpus, DataError, TrafficMatrix, make_label_space

CORPUS_FORMAT = "tfx-corpus/1"


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    header = {
        "format": CORPUS_FORMAT,
        "L": corpus.seq_len,
        "pl_max": corpus.pl_max,
        "labels": [lab.name for lab in corpus.label_space],
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for s in corpus.samples:
            rec = {
                "label": s.label.name,
                "len": s.effective_length,
                "pl": list(s.values),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_corpus(path: str | Path, provenance: str = "real") -> Corpus:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty corpus file")
    header = _parse_json_line(path, 1, lines[0])
    for key in ("format", "L", "pl_max", "labels"):
        if key not in header:
            raise DataError(f"{path}: header missing field {key!r}")
    if header["format"] != CORPUS_FORMAT:
        raise DataError(
            f"{path}: unsupported format {header['format']!r}, "
            f"expected {CORPUS_FORMAT!r}"
        )
    extra = set(header) - {"format", "L", "pl_max", "labels"}
    if extra:
        raise DataError(f"{path}: unexpected header fields {sorted(extra)}")
    seq_len = int(header["L"])
    pl_max = int(header["pl_max"])
    labels = make_label_space([str(n) for n in header["labels"]])
    by_name = {lab.name: lab for lab in labels}

    samples: list[TrafficMatrix] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise DataError(f"{path}:{lineno}: blank line in corpus body")
        rec = _parse_json_line(path, lineno, raw)
        try:
            name = rec["label"]
            eff = int(rec["len"])
            pl = [int(v) for v in rec["pl"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed record ({exc})") from exc
        if name not in by_name:
            raise DataError(
                f"{path}:{lineno}: label {name!r} not in header label list"
            )
        if len(pl) != seq_len:
            raise DataError(
                f"{path}:{lineno}: expected {seq_len} values, got {len(pl)}"
            )
        try:
            samples.append(TrafficMatrix(tuple(pl), eff, by_name[name]))
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return Corpus(labels, tuple(samples), seq_len, pl_max, provenance)


def _parse_json_line(path: Path, lineno: int, raw: str) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{path}:{lineno}: expected JSON object")
    return obj
