"""Single-file model container.

Layout: 4-byte magic "TFXM", uint32 little-endian header length, a JSON
header (sorted keys, compact separators), then raw tensor bytes in the
order listed by the header's tensor manifest.  Tensors are little-endian,
row-major.  The header carries the model kind, the vocabulary it was
fitted under (including label names), hyperparameters, and optional
extras such as the training loss history.

Writing is fully deterministic: serialising the same model twice yields
byte-identical files.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import ModelError

MODEL_MAGIC = b"TFXM"

_DTYPES = {"float32": "<f4", "float64": "<f8", "int8": "|i1",
           "int32": "<i4", "int64": "<i8"}


def save_model(path: str | Path, kind: str, vocab_info: dict,
               hyperparams: dict, tensors: list[tuple[str, np.ndarray]],
               scales: dict[str, float] | None = None,
               extra: dict | None = None) -> None:
    path = Path(path)
    manifest = []
    blobs = []
    for name, arr in tensors:
        arr = np.asarray(arr)
        dtype_name = str(arr.dtype)
        if dtype_name not in _DTYPES:
            raise ModelError(f"tensor {name!r} has unsupported dtype {dtype_name}")
        entry = {"name": name, "dtype": dtype_name, "shape": list(arr.shape)}
        if scales and name in scales:
            entry["scale"] = float(scales[name])
        manifest.append(entry)
        blobs.append(arr.astype(_DTYPES[dtype_name]).tobytes(order="C"))
    header = {
        "kind": kind,
        "vocab": vocab_info,
        "hyperparams": hyperparams,
        "tensors": manifest,
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def load_model_raw(path: str | Path) -> dict:
    """Read a container into {"kind", "vocab", "hyperparams", "extra",
    "tensors": {name: array}, "scales": {name: float}}."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8 or data[:4] != MODEL_MAGIC:
        raise ModelError(f"{path}: not a model container")
    head_len = struct.unpack("<I", data[4:8])[0]
    if len(data) < 8 + head_len:
        raise ModelError(f"{path}: truncated header")
    try:
        header = json.loads(data[8:8 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"{path}: corrupt header ({exc})") from exc
    for key in ("kind", "vocab", "hyperparams", "tensors"):
        if key not in header:
            raise ModelError(f"{path}: header missing {key!r}")
    off = 8 + head_len
    tensors: dict[str, np.ndarray] = {}
    scales: dict[str, float] = {}
    for entry in header["tensors"]:
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise ModelError(
                f"{path}: unsupported tensor dtype {entry['dtype']!r}")
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * np.dtype(dtype).itemsize
        if off + nbytes > len(data):
            raise ModelError(f"{path}: truncated tensor {entry['name']!r}")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        if "scale" in entry:
            scales[entry["name"]] = float(entry["scale"])
        off += nbytes
    if off != len(data):
        raise ModelError(f"{path}: {len(data) - off} trailing bytes")
    return {
        "kind": header["kind"],
        "vocab": header["vocab"],
        "hyperparams": header["hyperparams"],
        "extra": header.get("extra", {}),
        "tensors": tensors,
        "scales": scales,
    }


def load_generator(path: str | Path):
    """Load any generator model by kind (markov or lm)."""
    raw = load_model_raw(path)
    if raw["kind"] == "markov":
        from .markov import MarkovGenerator
        return MarkovGenerator.from_raw(raw)
    if raw["kind"] == "lm":
        from .neural import TinyCausalLm
        return TinyCausalLm.from_raw(raw)
    raise ModelError(f"{path}: unknown model kind {raw['kind']!r}")
