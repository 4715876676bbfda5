"""Matplotlib figure rendering for pipeline reports.

All figures go straight to files (headless Agg backend). SVG output is kept
reproducible: a fixed hash salt for element ids and no embedded creation
date.
"""

from __future__ import annotations

from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .datafusion import CorrelationMatrix  # noqa: E402
from .evalmetrics import ConfusionMatrix  # noqa: E402
from .featsel import ImportanceRanking  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cogload"

_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def correlation_heatmap(corr: CorrelationMatrix, path, title: str = "Feature correlations") -> None:
    """Symmetric heatmap of the Pearson matrix, blue-white-red over [-1, 1]."""
    n = len(corr.names)
    size = min(12.0, max(4.0, 0.25 * n))
    fig, ax = plt.subplots(figsize=(size * 1.15, size))
    im = ax.imshow(corr.values, cmap="RdBu_r", vmin=-1.0, vmax=1.0, interpolation="nearest")
    if n <= 40:
        ax.set_xticks(range(n))
        ax.set_yticks(range(n))
        ax.set_xticklabels(corr.names, rotation=90, fontsize=6)
        ax.set_yticklabels(corr.names, fontsize=6)
    else:
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_xlabel(f"{n} features")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def confusion_heatmap(cm: ConfusionMatrix, path, title: str = "Confusion matrix") -> None:
    """3x3 heatmap with per-cell counts, rows true and columns predicted."""
    counts = cm.counts
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(counts, cmap="Blues", vmin=0)
    threshold = counts.max() / 2.0 if counts.max() else 0.5
    for t in range(counts.shape[0]):
        for p in range(counts.shape[1]):
            color = "white" if counts[t, p] > threshold else "black"
            ax.text(p, t, str(int(counts[t, p])), ha="center", va="center", color=color)
    ax.set_xticks(range(3))
    ax.set_yticks(range(3))
    ax.set_xticklabels([f"pred {c}" for c in range(3)])
    ax.set_yticklabels([f"true {c}" for c in range(3)])
    ax.set_xlabel("Predicted level")
    ax.set_ylabel("True level")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def loss_curve(history: Sequence[float], path, title: str = "Training loss") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(range(1, len(history) + 1), list(history), lw=1.2)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Mean cross-entropy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def importance_bars(
    ranking: ImportanceRanking, path, top_n: int = 20, title: str = "Feature importance"
) -> None:
    """Horizontal bars for the top-ranked features, best on top."""
    entries = ranking.entries[:top_n]
    names = [name for name, _ in entries]
    scores = [score for _, score in entries]
    finite = [s if np.isfinite(s) else 0.0 for s in scores]
    fig, ax = plt.subplots(figsize=(6.0, 0.3 * len(entries) + 1.2))
    y = np.arange(len(entries))
    ax.barh(y, finite, color="#31688e")
    for i, s in enumerate(scores):
        if not np.isfinite(s):
            ax.text(0, i, " inf", va="center", fontsize=7)
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("Score")
    ax.set_title(title)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
