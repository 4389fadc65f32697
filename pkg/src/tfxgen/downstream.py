"""Downstream utility protocols: TSTR and class-balancing augmentation.

TSTR (train on synthetic, test on real): fit the reference classifier on
a synthetic corpus, evaluate macro-F1 on held-out real data, and compare
against the same classifier fitted on real training data with the same
seed.  The classifier sees only the signed value vectors, so a synthetic
corpus is exactly as useful as the decision boundaries it preserves.

The augmentation protocol simulates a low-data regime: keep a stratified
fraction of the real training split, then top every class back up to the
size of the full split's majority class using one of the sample sources
(fitted generator, interpolation, duplication, or nothing).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    STREAM_SUBSET,
    ConfigError,
    Corpus,
    DataError,
    derive_seed,
    round_half_up,
    split_corpus,
)
from .augment import fast_retransmit_generate, smote_generate
from .forest import ForestConfig, ForestModel, forest_fit, forest_predict
from .generate import generate_corpus
from .markov import MarkovGenerator

AUGMENT_SOURCES = ("generator", "smote", "fast_retransmit", "none")


def corpus_features(corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    """Signed value vectors as float features plus integer labels."""
    if not corpus.samples:
        raise DataError("corpus has no samples")
    X = np.array([s.values for s in corpus.samples], dtype=np.float64)
    y = np.array([s.label.id for s in corpus.samples], dtype=np.int64)
    return X, y


def per_class_prf(y_true: np.ndarray, y_pred: np.ndarray,
                  n_classes: int) -> list[dict[str, float]]:
    """Precision/recall/F1 per class; zero denominators score 0."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError("prediction and truth lengths differ")
    rows = []
    for c in range(n_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        rows.append({"precision": prec, "recall": rec, "f1": f1,
                     "support": tp + fn})
    return rows


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    rows = per_class_prf(y_true, y_pred, n_classes)
    return float(np.mean([r["f1"] for r in rows]))


def _fit_eval(train: Corpus, test: Corpus, config: ForestConfig,
              seed: int, threads: int = 1) -> tuple[float, list[dict], ForestModel]:
    Xtr, ytr = corpus_features(train)
    Xte, yte = corpus_features(test)
    model = forest_fit(Xtr, ytr, train.n_classes, config, seed, threads)
    pred = forest_predict(model, Xte)
    return macro_f1(yte, pred, test.n_classes), \
        per_class_prf(yte, pred, test.n_classes), model


def _check_same_space(*corpora: Corpus) -> None:
    first = corpora[0]
    for other in corpora[1:]:
        if other.label_space != first.label_space:
            a = [l.name for l in first.label_space]
            b = [l.name for l in other.label_space]
            raise DataError(f"label spaces differ: {a} vs {b}")
        if other.seq_len != first.seq_len:
            raise DataError("corpora have different sequence lengths")


@dataclass
class TstrReport:
    f1_synthetic: float
    f1_real_baseline: float
    gap: float
    per_class_synthetic: list[dict]
    per_class_baseline: list[dict]
    missing_classes: list[str]
    n_synthetic: int
    n_train: int
    n_test: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tstr(synth: Corpus, real_train: Corpus, real_test: Corpus,
         config: ForestConfig | None = None, seed: int = 0,
         threads: int = 1) -> TstrReport:
    """Train-on-synthetic / test-on-real against a real-data baseline.

    Both classifiers use the same seed, so passing the real training
    corpus as `synth` reproduces the baseline bit for bit.
    """
    _check_same_space(synth, real_train, real_test)
    config = config or ForestConfig()
    f1_syn, pc_syn, _ = _fit_eval(synth, real_test, config, seed, threads)
    f1_real, pc_real, _ = _fit_eval(real_train, real_test, config, seed, threads)
    counts = synth.class_counts()
    missing = [lab.name for lab in synth.label_space if counts[lab.id] == 0]
    return TstrReport(
        f1_synthetic=f1_syn,
        f1_real_baseline=f1_real,
        gap=f1_syn - f1_real,
        per_class_synthetic=pc_syn,
        per_class_baseline=pc_real,
        missing_classes=missing,
        n_synthetic=len(synth.samples),
        n_train=len(real_train.samples),
        n_test=len(real_test.samples),
    )


# -- augmentation protocol ----------------------------------------------------


def stratified_subset(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Keep round-half-up(fraction * n_c) samples of every class."""
    if fraction == 1.0:
        return corpus
    subset, _ = split_corpus(corpus, fraction, seed)
    return subset


@dataclass
class AugmentCase:
    fraction: float
    source: str
    f1: float
    per_class: list[dict]
    n_real: int
    n_added: int
    class_counts: dict[str, int]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class AugmentReport:
    cases: list[AugmentCase]
    f1_full_baseline: float
    n_train_full: int
    n_test: int
    target_per_class: int
    fractions: list[float]
    sources: list[str]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["cases"] = [c.to_dict() for c in self.cases]
        return d


def _mint_samples(source: str, subset: Corpus, needs: dict[int, int],
                  seed: int, generator, smote_k: int, fr_p: float) -> list:
    minted = []
    if source == "generator":
        synth, _ = generate_corpus(generator, needs, seed)
        minted.extend(synth.samples)
        return minted
    for class_id in sorted(needs):
        need = needs[class_id]
        if need <= 0:
            continue
        pool = list(subset.samples_of(class_id))
        class_seed = derive_seed(seed, class_id)
        if source == "smote":
            minted.extend(smote_generate(pool, need, class_seed,
                                         subset.pl_max, k=smote_k))
        elif source == "fast_retransmit":
            minted.extend(fast_retransmit_generate(pool, need, class_seed,
                                                   p=fr_p))
        else:
            raise ConfigError(f"unknown augmentation source {source!r}")
    return minted


def run_augment_case(train_full: Corpus, test: Corpus, fraction: float,
                     source: str, seed: int,
                     config: ForestConfig | None = None,
                     generator=None, smote_k: int = 5, fr_p: float = 1.0,
                     threads: int = 1) -> AugmentCase:
    """One cell of the sweep: subset, top up to balance, fit, score."""
    if source not in AUGMENT_SOURCES:
        raise ConfigError(
            f"source must be one of {AUGMENT_SOURCES}, got {source!r}")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    config = config or ForestConfig()
    scaled = round_half_up(fraction * 1_000_000)
    subset = stratified_subset(train_full, fraction,
                               derive_seed(seed, STREAM_SUBSET, scaled))
    target = max(train_full.class_counts().values())
    minted = []
    if source != "none":
        sub_counts = subset.class_counts()
        needs = {lab.id: target - sub_counts[lab.id]
                 for lab in subset.label_space}
        if source == "generator" and generator is None:
            raise ConfigError("source 'generator' needs a fitted generator")
        case_seed = derive_seed(seed, scaled, AUGMENT_SOURCES.index(source))
        minted = _mint_samples(source, subset, needs, case_seed,
                               generator, smote_k, fr_p)
    train = train_full.with_samples(
        list(subset.samples) + list(minted),
        provenance="augmented" if minted else subset.provenance,
    )
    f1, per_class, _ = _fit_eval(train, test, config, seed, threads)
    counts = train.class_counts()
    return AugmentCase(
        fraction=fraction,
        source=source,
        f1=f1,
        per_class=per_class,
        n_real=len(subset.samples),
        n_added=len(minted),
        class_counts={lab.name: counts[lab.id]
                      for lab in train.label_space},
    )


def run_augment_sweep(real: Corpus, seed: int = 0,
                      fractions: tuple[float, ...] = (0.05, 0.1, 0.2),
                      sources: tuple[str, ...] = AUGMENT_SOURCES,
                      config: ForestConfig | None = None,
                      generator=None, smote_k: int = 5, fr_p: float = 1.0,
                      train_fraction: float = 0.8,
                      threads: int = 1) -> AugmentReport:
    """Fraction x source sweep over one fixed train/test split.

    The generator (a Markov model fitted on the training split when none
    is supplied) and every forest share the base seed, so rows differ
    only in their training data.
    """
    config = config or ForestConfig()
    train_full, test = split_corpus(real, train_fraction, seed)
    if generator is None and "generator" in sources:
        generator = MarkovGenerator.fit(train_full)
    if generator is not None and \
            tuple(generator.label_space) != train_full.label_space:
        raise DataError("generator label space does not match corpus")
    f1_full, _, _ = _fit_eval(train_full, test, config, seed, threads)
    cases = []
    for fraction in fractions:
        for source in sources:
            cases.append(run_augment_case(
                train_full, test, fraction, source, seed, config,
                generator, smote_k, fr_p, threads))
    return AugmentReport(
        cases=cases,
        f1_full_baseline=f1_full,
        n_train_full=len(train_full.samples),
        n_test=len(test.samples),
        target_per_class=max(train_full.class_counts().values()),
        fractions=list(fractions),
        sources=list(sources),
    )
