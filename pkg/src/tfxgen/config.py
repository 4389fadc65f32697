"""INI experiment configuration with strict key checking.

Sections mirror the pipeline stages; every key has a default, unknown
sections or keys are configuration errors rather than silent noise.
Sentinel zeros mean "derive it": window 0 uses the full sequence prefix,
max_depth 0 grows to purity, features_per_split 0 takes ceil(sqrt(F)).
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .core import ConfigError
from .downstream import AUGMENT_SOURCES
from .forest import ForestConfig
from .neural import LmConfig


@dataclass
class PipelineSettings:
    seq_len: int = 10
    pl_max: int = 1460
    seed: int = 0
    threads: int = 1
    train_fraction: float = 0.8


@dataclass
class GeneratorSettings:
    kind: str = "markov"
    order: int = 1
    alpha: float = 0.001
    embed_dim: int = 64
    hidden_dim: int = 360
    window: int = 0
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 10
    temperature: float = 1.0
    top_k: int = 0
    param_budget: int = 2_000_000


@dataclass
class ForestSettings:
    n_trees: int = 100
    max_depth: int = 0
    min_samples_leaf: int = 1
    features_per_split: int = 0


@dataclass
class DownstreamSettings:
    fractions: tuple[float, ...] = (0.05, 0.1, 0.2)
    sources: tuple[str, ...] = AUGMENT_SOURCES
    smote_k: int = 5
    fr_p: float = 1.0


@dataclass
class ExperimentConfig:
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    forest: ForestSettings = field(default_factory=ForestSettings)
    downstream: DownstreamSettings = field(default_factory=DownstreamSettings)

    def forest_config(self) -> ForestConfig:
        f = self.forest
        return ForestConfig(
            n_trees=f.n_trees,
            max_depth=f.max_depth or None,
            min_samples_leaf=f.min_samples_leaf,
            features_per_split=f.features_per_split or None,
        )

    def lm_config(self) -> LmConfig:
        g = self.generator
        return LmConfig(
            embed_dim=g.embed_dim, hidden_dim=g.hidden_dim,
            window=g.window or None, learning_rate=g.learning_rate,
            batch_size=g.batch_size, epochs=g.epochs,
            temperature=g.temperature, top_k=g.top_k,
            param_budget=g.param_budget,
        )

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "pipeline": PipelineSettings,
    "generator": GeneratorSettings,
    "forest": ForestSettings,
    "downstream": DownstreamSettings,
}


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(p) for p in parts)
            return tuple(parts)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Parse an INI file over the defaults; None yields pure defaults."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"{path}: unknown section [{section}], expected one of "
                f"{sorted(_SECTIONS)}"
            )
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in [{section}] "
                    f"(known: {sorted(known)})"
                )
            default = getattr(target, key)
            setattr(target, key, _convert(section, key, raw, default))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    p = cfg.pipeline
    if p.seq_len < 1:
        raise ConfigError("pipeline.seq_len must be >= 1")
    if p.pl_max < 1:
        raise ConfigError("pipeline.pl_max must be >= 1")
    if p.seed < 0:
        raise ConfigError("pipeline.seed must be >= 0")
    if p.threads < 1:
        raise ConfigError("pipeline.threads must be >= 1")
    if not 0.0 < p.train_fraction < 1.0:
        raise ConfigError("pipeline.train_fraction must be in (0, 1)")
    if cfg.generator.kind not in ("markov", "lm"):
        raise ConfigError(
            f"generator.kind must be markov or lm, got {cfg.generator.kind!r}")
    bad = [s for s in cfg.downstream.sources if s not in AUGMENT_SOURCES]
    if bad:
        raise ConfigError(
            f"downstream.sources contains unknown entries {bad}, "
            f"valid: {list(AUGMENT_SOURCES)}"
        )
    for frac in cfg.downstream.fractions:
        if not 0.0 < frac <= 1.0:
            raise ConfigError(
                f"downstream.fractions entries must be in (0, 1], got {frac}")


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
