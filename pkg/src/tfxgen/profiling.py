"""Lightweight resource accounting for training and sampling runs."""
from __future__ import annotations

import resource
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .core import STREAM_LATENCY, derive_seed

MIN_LATENCY_SAMPLES = 100


@dataclass
class ResourceProfile:
    """Wall-clock and footprint numbers for one model.

    peak_memory_mb is the max RSS of the whole process, so it is an
    upper bound shared by everything that ran before the measurement,
    not a per-model figure.
    """

    train_seconds_per_epoch: float = 0.0
    epoch_seconds: list[float] = field(default_factory=list)
    generation_ms_per_sample: float = 0.0
    latency_samples: int = 0
    peak_memory_mb: float = 0.0
    model_size_mb: float = 0.0
    memory_note: str = "process-wide peak RSS, approximate"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def peak_rss_mb() -> float:
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    if sys.platform == "darwin":  # ru_maxrss is bytes there, KiB on Linux
        return peak / (1024.0 * 1024.0)
    return peak / 1024.0


def measure_generation_latency(generator, seed: int = 0,
                               n_samples: int = MIN_LATENCY_SAMPLES
                               ) -> tuple[float, int]:
    """Median per-sample wall-clock in ms over at least 100 single draws."""
    n_samples = max(n_samples, MIN_LATENCY_SAMPLES)
    class_ids = [lab.id for lab in generator.label_space]
    times = []
    for i in range(n_samples):
        class_id = class_ids[i % len(class_ids)]
        one_seed = derive_seed(seed, STREAM_LATENCY, i)
        t0 = time.perf_counter()
        generator.sample(class_id, 1, one_seed)
        times.append(time.perf_counter() - t0)
    return statistics.median(times) * 1000.0, n_samples


def build_profile(epoch_seconds: list[float], generator=None, seed: int = 0,
                  model_path: str | Path | None = None,
                  latency_samples: int = MIN_LATENCY_SAMPLES) -> ResourceProfile:
    profile = ResourceProfile()
    profile.epoch_seconds = [float(t) for t in epoch_seconds]
    if profile.epoch_seconds:
        profile.train_seconds_per_epoch = statistics.median(
            profile.epoch_seconds)
    if generator is not None:
        ms, n = measure_generation_latency(generator, seed, latency_samples)
        profile.generation_ms_per_sample = ms
        profile.latency_samples = n
    if model_path is not None:
        profile.model_size_mb = Path(model_path).stat().st_size / (1024.0 ** 2)
    profile.peak_memory_mb = peak_rss_mb()
    return profile
