"""Matplotlib figures rendered next to the delimited reports.

Everything goes through the Agg backend straight to PNG files, no
display required; rendering the same report twice produces identical
bytes, so figures are covered by the same determinism guarantees as
the CSV/JSON outputs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .fidelity import METRIC_NAMES, FidelityReport  # noqa: E402


def fig_fidelity_macro(reports: dict[str, FidelityReport],
                       path: str | Path) -> None:
    """Grouped bars: one group per metric, one bar per generator."""
    names = list(reports)
    metrics = list(METRIC_NAMES) + ["uniq_align", "leakage"]
    x = np.arange(len(metrics), dtype=np.float64)
    width = 0.8 / max(len(names), 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, name in enumerate(names):
        vals = [reports[name].macro[m] for m in metrics]
        ax.bar(x + i * width, vals, width, label=name)
    ax.set_xticks(x + width * (len(names) - 1) / 2)
    ax.set_xticklabels(metrics, rotation=20, ha="right")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.set_title("macro fidelity (lower is better, except leakage)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def fig_f1_vs_fraction(report, path: str | Path) -> None:
    """Macro-F1 against kept fraction, one curve per augmentation source."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for source in report.sources:
        pts = [(c.fraction, c.f1) for c in report.cases if c.source == source]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=source)
    ax.axhline(report.f1_full_baseline, color="gray", linestyle="--",
               label="full training set")
    ax.set_xlabel("fraction of training data kept")
    ax.set_ylabel("macro F1")
    ax.set_ylim(0, 1.05)
    ax.set_title("augmentation sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def fig_loss_curve(loss_history: list[float], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(loss_history)), loss_history, marker="o")
    ax.set_xlabel("epoch (0 = before training)")
    ax.set_ylabel("mean token cross-entropy (nats)")
    ax.set_title("language model training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def fig_gasf_panel(images: np.ndarray, titles: list[str],
                   path: str | Path, max_panels: int = 8) -> None:
    """A row of angular-field images, shared color scale in [-1, 1]."""
    n = min(len(images), max_panels)
    fig, axes = plt.subplots(1, n, figsize=(2.2 * n, 2.6), squeeze=False)
    for i in range(n):
        ax = axes[0][i]
        ax.imshow(images[i], vmin=-1.0, vmax=1.0, cmap="viridis")
        ax.set_title(titles[i], fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
