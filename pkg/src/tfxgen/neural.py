"""Tiny causal language model over token sequences.

Architecture: embed the last `window` tokens (left-padded with PAD),
concatenate, one ReLU hidden layer, softmax over the full vocabulary.

    params = V*d + (window*d)*h + h + h*V + V

With the default d=64, h=360 and window = L+1 this lands between one and
two million parameters for the standard vocabulary, small enough to train
on a CPU in seconds.  Training is plain minibatch Adam on next-token
cross-entropy; PAD positions are never used as targets.  All arithmetic
is numpy, float32 by default, float64 available for gradient checking.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    STREAM_EPOCH,
    STREAM_INIT,
    ClassLabel,
    ConfigError,
    Corpus,
    DataError,
    ModelError,
    stream_rng,
)
from .generate import GenerationStats
from .modelstore import load_model_raw, save_model
from .tokens import (
    EOS_ID,
    PAD_ID,
    TokenSequence,
    Vocabulary,
    corpus_to_sequences,
)

MAX_SAMPLE_TRIES = 1000

_WEIGHT_NAMES = ("embed", "w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class LmConfig:
    embed_dim: int = 64
    hidden_dim: int = 360
    window: int | None = None  # None resolves to seq_len + 1, the full prefix
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    temperature: float = 1.0
    top_k: int = 0  # 0 means the full vocabulary
    param_budget: int = 2_000_000
    dtype: str = "float32"

    def __post_init__(self):
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("embed_dim and hidden_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.top_k < 0:
            raise ConfigError("top_k must be >= 0 (0 = full vocabulary)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")


def lm_parameter_count(vocab_size: int, window: int, embed_dim: int,
                       hidden_dim: int) -> int:
    return (vocab_size * embed_dim
            + window * embed_dim * hidden_dim + hidden_dim
            + hidden_dim * vocab_size + vocab_size)


@dataclass
class TrainReport:
    loss_history: list[float]
    epoch_seconds: list[float]
    examples: int
    steps: int


def build_training_set(corpus: Corpus, vocab: Vocabulary,
                       window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (context, target) pairs from a corpus; PAD targets excluded."""
    ctxs: list[list[int]] = []
    tgts: list[int] = []
    for seq in corpus_to_sequences(corpus, vocab):
        ids = seq.ids
        for pos in range(1, len(ids)):
            if ids[pos] == PAD_ID:
                continue
            ctx = list(ids[max(0, pos - window):pos])
            if len(ctx) < window:
                ctx = [PAD_ID] * (window - len(ctx)) + ctx
            ctxs.append(ctx)
            tgts.append(ids[pos])
    return (np.array(ctxs, dtype=np.int32),
            np.array(tgts, dtype=np.int64))


class TinyCausalLm:
    def __init__(self, vocab: Vocabulary, seq_len: int,
                 label_space: tuple[ClassLabel, ...], cfg: LmConfig,
                 weights: dict[str, np.ndarray], quantized: bool = False,
                 scales: dict[str, float] | None = None,
                 loss_history: list[float] | None = None):
        self.vocab = vocab
        self.seq_len = seq_len
        self.label_space = label_space
        self.cfg = cfg
        self.weights = weights
        self.quantized = quantized
        self.scales = scales or {}
        self.loss_history = loss_history or []
        if quantized and set(self.scales) != set(_WEIGHT_NAMES):
            raise ModelError("quantized model needs a scale per tensor")

    @property
    def window(self) -> int:
        return self.cfg.window if self.cfg.window else self.seq_len + 1

    @property
    def np_dtype(self):
        return np.float64 if self.cfg.dtype == "float64" else np.float32

    def parameter_count(self) -> int:
        return int(sum(w.size for w in self.weights.values()))

    # -- forward -------------------------------------------------------------

    def _dense(self) -> dict[str, np.ndarray]:
        if not self.quantized:
            return self.weights
        return {name: self.weights[name].astype(self.np_dtype)
                * self.np_dtype(self.scales[name])
                for name in _WEIGHT_NAMES}

    def logits(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.asarray(contexts, dtype=np.int64)
        if contexts.ndim != 2 or contexts.shape[1] != self.window:
            raise DataError(
                f"contexts must be (n, {self.window}), got {contexts.shape}")
        w = self._dense()
        x = w["embed"][contexts].reshape(contexts.shape[0], -1)
        h = np.maximum(x @ w["w1"] + w["b1"], 0)
        return h @ w["w2"] + w["b2"]

    def loss(self, contexts: np.ndarray, targets: np.ndarray,
             batch: int = 4096) -> float:
        targets = np.asarray(targets, dtype=np.int64)
        total = 0.0
        for start in range(0, len(targets), batch):
            sl = slice(start, start + batch)
            logits = self.logits(contexts[sl]).astype(np.float64)
            z = logits - logits.max(axis=1, keepdims=True)
            lse = np.log(np.exp(z).sum(axis=1))
            picked = z[np.arange(z.shape[0]), targets[sl]]
            total += float(np.sum(lse - picked))
        return total / len(targets)

    def loss_and_grads(self, contexts: np.ndarray,
                       targets: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        if self.quantized:
            raise ModelError("cannot take gradients of a quantized model")
        w = self.weights
        ctx = np.asarray(contexts, dtype=np.int64)
        tgt = np.asarray(targets, dtype=np.int64)
        n = ctx.shape[0]
        emb = w["embed"][ctx]
        x = emb.reshape(n, -1)
        pre = x @ w["w1"] + w["b1"]
        h = np.maximum(pre, 0)
        logits = h @ w["w2"] + w["b2"]

        z = logits - logits.max(axis=1, keepdims=True)
        ez = np.exp(z)
        p = ez / ez.sum(axis=1, keepdims=True)
        rows = np.arange(n)
        loss = float(np.mean(np.log(ez.sum(axis=1)) - z[rows, tgt]))

        dlogits = p.copy()
        dlogits[rows, tgt] -= 1.0
        dlogits /= n
        grads = {
            "w2": h.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        dh = dlogits @ w["w2"].T
        dpre = dh * (pre > 0)
        grads["w1"] = x.T @ dpre
        grads["b1"] = dpre.sum(axis=0)
        dx = dpre @ w["w1"].T
        dembed = np.zeros_like(w["embed"])
        np.add.at(dembed, ctx.reshape(-1), dx.reshape(n * self.window, -1))
        grads["embed"] = dembed
        return loss, grads

    # -- training ------------------------------------------------------------

    @classmethod
    def init(cls, vocab: Vocabulary, seq_len: int,
             label_space: tuple[ClassLabel, ...], cfg: LmConfig,
             seed: int) -> "TinyCausalLm":
        window = cfg.window if cfg.window else seq_len + 1
        cfg = replace(cfg, window=window)
        n_params = lm_parameter_count(vocab.size, window, cfg.embed_dim,
                                      cfg.hidden_dim)
        if n_params > cfg.param_budget:
            raise ModelError(
                f"model would have {n_params} parameters, over the budget "
                f"of {cfg.param_budget}; shrink embed_dim or hidden_dim"
            )
        dt = np.float64 if cfg.dtype == "float64" else np.float32
        rng = stream_rng(seed, STREAM_INIT)
        weights = {
            "embed": (rng.standard_normal((vocab.size, cfg.embed_dim))
                      * 0.02).astype(dt),
            "w1": (rng.standard_normal((window * cfg.embed_dim, cfg.hidden_dim))
                   * np.sqrt(1.0 / (window * cfg.embed_dim))).astype(dt),
            "b1": np.zeros(cfg.hidden_dim, dtype=dt),
            "w2": (rng.standard_normal((cfg.hidden_dim, vocab.size))
                   * 0.02).astype(dt),
            "b2": np.zeros(vocab.size, dtype=dt),
        }
        return cls(vocab, seq_len, label_space, cfg, weights)

    @classmethod
    def train(cls, corpus: Corpus, cfg: LmConfig | None = None,
              seed: int = 0) -> tuple["TinyCausalLm", TrainReport]:
        cfg = cfg or LmConfig()
        counts = corpus.class_counts()
        empty = [corpus.label_space[c].name for c, n in counts.items() if n == 0]
        if empty:
            raise DataError(f"classes without samples: {empty}")
        vocab = Vocabulary(corpus.pl_max, corpus.n_classes)
        model = cls.init(vocab, corpus.seq_len, corpus.label_space, cfg, seed)
        cfg = model.cfg  # window resolved
        ctxs, tgts = build_training_set(corpus, vocab, model.window)

        adam_m = {k: np.zeros_like(v) for k, v in model.weights.items()}
        adam_v = {k: np.zeros_like(v) for k, v in model.weights.items()}
        step = 0
        loss_history = [model.loss(ctxs, tgts)]
        epoch_seconds: list[float] = []
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            perm = stream_rng(seed, STREAM_EPOCH, epoch).permutation(len(tgts))
            for start in range(0, len(tgts), cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                loss, grads = model.loss_and_grads(ctxs[idx], tgts[idx])
                if not np.isfinite(loss):
                    raise ModelError(
                        f"non-finite loss at epoch {epoch} step {step}; "
                        f"try a lower learning_rate"
                    )
                step += 1
                b1c = 1.0 - cfg.adam_beta1 ** step
                b2c = 1.0 - cfg.adam_beta2 ** step
                for name in _WEIGHT_NAMES:
                    g = grads[name]
                    adam_m[name] = cfg.adam_beta1 * adam_m[name] \
                        + (1 - cfg.adam_beta1) * g
                    adam_v[name] = cfg.adam_beta2 * adam_v[name] \
                        + (1 - cfg.adam_beta2) * g * g
                    update = (adam_m[name] / b1c) / \
                        (np.sqrt(adam_v[name] / b2c) + cfg.adam_eps)
                    model.weights[name] -= (cfg.learning_rate
                                            * update).astype(model.np_dtype)
            loss_history.append(model.loss(ctxs, tgts))
            epoch_seconds.append(time.perf_counter() - t0)
        model.loss_history = loss_history
        report = TrainReport(loss_history, epoch_seconds, len(tgts), step)
        return model, report

    # -- sampling ------------------------------------------------------------

    def _context_window(self, ids: list[int]) -> np.ndarray:
        ctx = ids[-self.window:]
        if len(ctx) < self.window:
            ctx = [PAD_ID] * (self.window - len(ctx)) + ctx
        return np.array([ctx], dtype=np.int64)

    def _draw(self, logits: np.ndarray, temperature: float, top_k: int,
              rng: np.random.Generator) -> int:
        scaled = logits.astype(np.float64) / temperature
        if 0 < top_k < scaled.shape[0]:
            cand = np.argsort(-scaled, kind="stable")[:top_k]
        else:
            cand = np.arange(scaled.shape[0])
        z = scaled[cand] - scaled[cand].max()
        p = np.exp(z)
        cum = np.cumsum(p / p.sum())
        cum[-1] = 1.0
        return int(cand[np.searchsorted(cum, rng.random(), side="right")])

    def sample(self, class_id: int, count: int, seed: int,
               stats: GenerationStats | None = None,
               temperature: float | None = None,
               top_k: int | None = None) -> list[TokenSequence]:
        """Draw well-formed sequences; rng keyed (seed, class_id, index).

        Generation walks token by token until EOS or L values.  A PAD or
        class token drawn mid-body ends the sample early and counts as a
        repair; a sample that stops before any value is rejected and
        retried on the same stream.  top_k=1 is exactly greedy decoding.
        """
        if not any(lab.id == class_id for lab in self.label_space):
            raise DataError(f"class id {class_id} not in label space")
        temperature = self.cfg.temperature if temperature is None else temperature
        top_k = self.cfg.top_k if top_k is None else top_k
        if temperature <= 0:
            raise ConfigError("temperature must be > 0")
        out: list[TokenSequence] = []
        for index in range(count):
            rng = stream_rng(seed, class_id, index)
            values = None
            repaired = False
            for _ in range(MAX_SAMPLE_TRIES):
                if stats is not None:
                    stats.requested += 1
                values, repaired = self._draw_values(class_id, rng,
                                                     temperature, top_k)
                if values:
                    break
                if stats is not None:
                    stats.rejected += 1
            if not values:
                raise ModelError(
                    f"class {class_id}: no valid sample in "
                    f"{MAX_SAMPLE_TRIES} tries"
                )
            if stats is not None:
                stats.emitted += 1
                if repaired:
                    stats.repaired += 1
            out.append(self._wrap(class_id, values))
        return out

    def _draw_values(self, class_id: int, rng: np.random.Generator,
                     temperature: float,
                     top_k: int) -> tuple[list[int], bool]:
        ids = [self.vocab.class_token(class_id)]
        values: list[int] = []
        repaired = False
        while len(values) < self.seq_len:
            logits = self.logits(self._context_window(ids))[0]
            tok = self._draw(logits, temperature, top_k, rng)
            kind = self.vocab.token_kind(tok)
            if kind == "value":
                ids.append(tok)
                values.append(self.vocab.token_value(tok))
                continue
            if kind != "eos":
                repaired = True  # PAD or class prompt drawn mid-body
            break
        return values, repaired

    def greedy_decode(self, class_id: int) -> TokenSequence:
        """Deterministic argmax decode, identical to sampling with top_k=1."""
        ids = [self.vocab.class_token(class_id)]
        values: list[int] = []
        while len(values) < self.seq_len:
            logits = self.logits(self._context_window(ids))[0]
            tok = int(np.argmax(logits))
            if self.vocab.token_kind(tok) != "value":
                break
            ids.append(tok)
            values.append(self.vocab.token_value(tok))
        return self._wrap(class_id, values)

    def _wrap(self, class_id: int, values: list[int]) -> TokenSequence:
        ids = [self.vocab.class_token(class_id)]
        ids.extend(self.vocab.value_token(v) for v in values)
        ids.append(EOS_ID)
        ids.extend([PAD_ID] * (self.seq_len + 2 - len(ids)))
        return TokenSequence(tuple(ids))

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        hyper = {
            "embed_dim": self.cfg.embed_dim,
            "hidden_dim": self.cfg.hidden_dim,
            "window": self.window,
            "learning_rate": self.cfg.learning_rate,
            "batch_size": self.cfg.batch_size,
            "epochs": self.cfg.epochs,
            "adam_beta1": self.cfg.adam_beta1,
            "adam_beta2": self.cfg.adam_beta2,
            "adam_eps": self.cfg.adam_eps,
            "temperature": self.cfg.temperature,
            "top_k": self.cfg.top_k,
            "param_budget": self.cfg.param_budget,
            "dtype": self.cfg.dtype,
            "quantized": self.quantized,
        }
        tensors = [(name, self.weights[name]) for name in _WEIGHT_NAMES]
        save_model(
            path, "lm",
            vocab_info={
                "pl_max": self.vocab.pl_max,
                "n_classes": self.vocab.n_classes,
                "seq_len": self.seq_len,
                "labels": [lab.name for lab in self.label_space],
            },
            hyperparams=hyper,
            tensors=tensors,
            scales=self.scales if self.quantized else None,
            extra={"loss_history": self.loss_history},
        )

    @classmethod
    def from_raw(cls, raw: dict) -> "TinyCausalLm":
        if raw["kind"] != "lm":
            raise ModelError(f"expected lm model, got {raw['kind']!r}")
        voc = raw["vocab"]
        vocab = Vocabulary(int(voc["pl_max"]), int(voc["n_classes"]))
        labels = tuple(ClassLabel(i, n) for i, n in enumerate(voc["labels"]))
        h = raw["hyperparams"]
        cfg = LmConfig(
            embed_dim=int(h["embed_dim"]), hidden_dim=int(h["hidden_dim"]),
            window=int(h["window"]), learning_rate=float(h["learning_rate"]),
            batch_size=int(h["batch_size"]), epochs=int(h["epochs"]),
            adam_beta1=float(h["adam_beta1"]),
            adam_beta2=float(h["adam_beta2"]),
            adam_eps=float(h["adam_eps"]),
            temperature=float(h["temperature"]), top_k=int(h["top_k"]),
            param_budget=int(h["param_budget"]), dtype=str(h["dtype"]),
        )
        quantized = bool(h.get("quantized"))
        weights = {name: raw["tensors"][name] for name in _WEIGHT_NAMES}
        missing = [n for n in _WEIGHT_NAMES if n not in raw["tensors"]]
        if missing:
            raise ModelError(f"model file missing tensors {missing}")
        return cls(vocab, int(voc["seq_len"]), labels, cfg, weights,
                   quantized=quantized, scales=raw["scales"] or None,
                   loss_history=list(raw["extra"].get("loss_history", [])))

    @classmethod
    def load(cls, path) -> "TinyCausalLm":
        return cls.from_raw(load_model_raw(path))


def quantize_weights_int8(model: TinyCausalLm) -> TinyCausalLm:
    """Per-tensor symmetric weight-only int8 quantization.

    scale = max|w| / 127 (1.0 for an all-zero tensor); activations stay
    float, weights are dequantized on the fly.  Quantizing an already
    quantized model is a no-op on the stored integers.
    """
    dense = model._dense()
    weights: dict[str, np.ndarray] = {}
    scales: dict[str, float] = {}
    for name in _WEIGHT_NAMES:
        w = np.asarray(dense[name], dtype=np.float64)
        peak = float(np.max(np.abs(w))) if w.size else 0.0
        scale = peak / 127.0 if peak > 0 else 1.0
        q = np.clip(np.rint(w / scale), -127, 127).astype(np.int8)
        weights[name] = q
        scales[name] = scale
    return TinyCausalLm(model.vocab, model.seq_len, model.label_space,
                        model.cfg, weights, quantized=True, scales=scales,
                        loss_history=list(model.loss_history))


def argmax_agreement(model_a: TinyCausalLm, model_b: TinyCausalLm,
                     contexts: np.ndarray, batch: int = 2048) -> float:
    """Fraction of contexts on which both models pick the same next token."""
    if model_a.window != model_b.window:
        raise ModelError("models have different context windows")
    if len(contexts) == 0:
        raise DataError("need at least one context")
    agree = 0
    for start in range(0, len(contexts), batch):
        sl = slice(start, start + batch)
        pa = np.argmax(model_a.logits(contexts[sl]), axis=1)
        pb = np.argmax(model_b.logits(contexts[sl]), axis=1)
        agree += int(np.sum(pa == pb))
    return agree / len(contexts)
