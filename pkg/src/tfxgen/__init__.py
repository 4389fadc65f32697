"""Lightweight network traffic synthesis workbench.

Turns packet traces into fixed-length per-biflow payload-length vectors,
fits small class-conditioned generators (Markov chains and a tiny neural
language model) over a token representation, scores synthetic corpora
with distributional fidelity metrics, and measures downstream utility
through train-on-synthetic and augmentation protocols with a built-in
random forest.
"""

__version__ = "0.1.0"

from .core import (
    ClassLabel,
    ConfigError,
    Corpus,
    DataError,
    Direction,
    FlowKey,
    ModelError,
    PacketEvent,
    RejectedSample,
    TrafficMatrix,
    WorkbenchError,
    canonical_key,
    split_corpus,
)
from .corpusfile import read_corpus, write_corpus
from .tokens import TokenSequence, Vocabulary

__all__ = [
    "__version__",
    "ClassLabel",
    "ConfigError",
    "Corpus",
    "DataError",
    "Direction",
    "FlowKey",
    "ModelError",
    "PacketEvent",
    "RejectedSample",
    "TokenSequence",
    "TrafficMatrix",
    "Vocabulary",
    "WorkbenchError",
    "canonical_key",
    "read_corpus",
    "split_corpus",
    "write_corpus",
]
