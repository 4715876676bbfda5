"""Classification metrics and the selector-comparison report.

Accuracy, per-class precision/recall/F1, one-vs-rest AUC, and 3x3 confusion
matrices, rendered as an aligned text table plus CSV/JSON exports. The table
layout follows the four-selector comparison: one row per method, columns
Accuracy, F1-score, AUC, Precision, Recall.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

NUM_CLASSES = 3

METRIC_COLUMNS = ["Accuracy", "F1-score", "AUC", "Precision", "Recall"]

# canonical comparison row order
SELECTOR_ORDER = ["variance_threshold", "pca", "anova", "extra_trees"]

SELECTOR_DISPLAY = {
    "variance_threshold": "Variance threshold",
    "pca": "PCA",
    "anova": "ANOVA",
    "extra_trees": "Extra trees",
    "random": "Random control",
    "none": "No selection",
}


@dataclass
class ConfusionMatrix:
    """counts[t][p]: rows are true classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (NUM_CLASSES, NUM_CLASSES):
            raise DimensionError(
                f"confusion matrix is {self.counts.shape}, expected "
                f"({NUM_CLASSES}, {NUM_CLASSES})"
            )
        if np.any(self.counts < 0):
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass
class MetricsReport:
    """All metrics for one trained model plus the config that produced it."""

    selector: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    per_class: Dict[str, List[float]]  # precision/recall/f1/auc lists, index = class
    averaging: str
    confusion: ConfusionMatrix
    config_fingerprint: Dict[str, object] = field(default_factory=dict)
    excluded_auc_classes: List[int] = field(default_factory=list)


def confusion(true_labels: np.ndarray, predicted_labels: np.ndarray) -> ConfusionMatrix:
    """Tally (true, predicted) pairs into a 3x3 matrix."""
    t = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError(
            f"label arrays must be 1D and equal length, got {t.shape} and {p.shape}"
        )
    if t.size == 0:
        raise ValidationError("no labels to tally")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.min() < 0 or arr.max() >= NUM_CLASSES:
            raise ValidationError(f"{name} labels must lie in {{0, 1, 2}}")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def classification_metrics(cm: ConfusionMatrix, averaging: str = "weighted") -> Dict[str, object]:
    """Accuracy plus per-class and aggregated precision/recall/F1.

    A class with zero predicted positives gets precision 0; a class with
    zero support gets recall 0 and weight 0. Weighted averages weight by
    support; macro averages all three classes equally.
    """
    if averaging not in ("macro", "weighted"):
        raise ValidationError(f"averaging must be macro or weighted, got {averaging!r}")
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise ValidationError("empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    pred_pos = counts.sum(axis=0).astype(np.float64)
    support = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred_pos, out=np.zeros(NUM_CLASSES), where=pred_pos > 0)
    recall = np.divide(tp, support, out=np.zeros(NUM_CLASSES), where=support > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(NUM_CLASSES), where=pr > 0)
    accuracy = float(tp.sum() / total)
    if averaging == "weighted":
        weights = support / total
    else:
        weights = np.full(NUM_CLASSES, 1.0 / NUM_CLASSES)
    return {
        "accuracy": accuracy,
        "precision": float(np.sum(precision * weights)),
        "recall": float(np.sum(recall * weights)),
        "f1": float(np.sum(f1 * weights)),
        "per_class": {
            "precision": precision.tolist(),
            "recall": recall.tolist(),
            "f1": f1.tolist(),
        },
    }


def _auc_rank(scores: np.ndarray, positives: np.ndarray) -> float:
    """One-vs-rest AUC via the Mann-Whitney rank statistic; ties get 1/2."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    # average ranks over tied groups (1-based ranks)
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int(positives.sum())
    n_neg = n - n_pos
    rank_sum = ranks[positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(
    scores: np.ndarray, true_labels: np.ndarray, averaging: str = "weighted"
) -> Dict[str, object]:
    """One-vs-rest multiclass AUC.

    scores: (n, 3) per-class scores (any strictly monotone transform of the
    logits gives the same result). Classes without both a positive and a
    negative example are excluded from the average with a warning; the
    returned dict lists them under "excluded".
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(true_labels)
    if scores.ndim != 2 or scores.shape[1] != NUM_CLASSES:
        raise DimensionError(f"scores must be (n, {NUM_CLASSES}), got {scores.shape}")
    if labels.shape != (scores.shape[0],):
        raise ValidationError("one label per score row required")
    if averaging not in ("macro", "weighted"):
        raise ValidationError(f"averaging must be macro or weighted, got {averaging!r}")
    per_class: List[Optional[float]] = []
    excluded: List[int] = []
    support = np.array([(labels == c).sum() for c in range(NUM_CLASSES)], dtype=np.float64)
    for c in range(NUM_CLASSES):
        positives = labels == c
        n_pos = int(positives.sum())
        if n_pos == 0 or n_pos == len(labels):
            excluded.append(c)
            per_class.append(None)
            continue
        per_class.append(_auc_rank(scores[:, c], positives))
    if excluded:
        warnings.warn(
            f"classes {excluded} lack positives or negatives; excluded from AUC",
            stacklevel=2,
        )
    kept = [c for c in range(NUM_CLASSES) if per_class[c] is not None]
    if not kept:
        raise ValidationError("no class has both positives and negatives")
    if averaging == "weighted":
        w = support[kept] / support[kept].sum()
    else:
        w = np.full(len(kept), 1.0 / len(kept))
    aggregate = float(np.sum(w * np.array([per_class[c] for c in kept])))
    return {"auc": aggregate, "per_class": per_class, "excluded": excluded}


def build_report(
    selector: str,
    true_labels: np.ndarray,
    predicted_labels: np.ndarray,
    scores: np.ndarray,
    averaging: str = "weighted",
    config_fingerprint: Optional[Dict[str, object]] = None,
) -> MetricsReport:
    """Assemble the full MetricsReport for one evaluated model."""
    cm = confusion(true_labels, predicted_labels)
    core = classification_metrics(cm, averaging)
    auc = roc_auc(scores, true_labels, averaging)
    per_class = dict(core["per_class"])
    per_class["auc"] = [a if a is not None else 0.0 for a in auc["per_class"]]
    return MetricsReport(
        selector=selector,
        accuracy=core["accuracy"],
        precision=core["precision"],
        recall=core["recall"],
        f1=core["f1"],
        auc=auc["auc"],
        per_class=per_class,
        averaging=averaging,
        confusion=cm,
        config_fingerprint=dict(config_fingerprint or {}),
        excluded_auc_classes=list(auc["excluded"]),
    )


# ---------------------------------------------------------------------------
# rendering


def _sorted_reports(reports: Sequence[MetricsReport]) -> List[MetricsReport]:
    """Canonical comparison order; unknown selectors keep their given order."""
    def key(item):
        idx, report = item
        if report.selector in SELECTOR_ORDER:
            return (0, SELECTOR_ORDER.index(report.selector), idx)
        return (1, 0, idx)

    return [r for _, r in sorted(enumerate(reports), key=key)]


def render_table(reports: Sequence[MetricsReport]) -> str:
    """Aligned text table, one selector per row, 4-decimal metrics."""
    if not reports:
        raise ValidationError("no reports to render")
    ordered = _sorted_reports(reports)
    rows = []
    for r in ordered:
        rows.append(
            [SELECTOR_DISPLAY.get(r.selector, r.selector)]
            + ["%.4f" % v for v in (r.accuracy, r.f1, r.auc, r.precision, r.recall)]
        )
    header = ["Method"] + METRIC_COLUMNS
    widths = [max(len(header[c]), *(len(row[c]) for row in rows)) for c in range(len(header))]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def write_report_csv(path, reports: Sequence[MetricsReport]) -> None:
    """CSV export; numbers at full precision so re-parsing is exact."""
    ordered = _sorted_reports(reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["selector", "accuracy", "f1", "auc", "precision", "recall", "averaging"])
        for r in ordered:
            writer.writerow(
                [r.selector]
                + [repr(v) for v in (r.accuracy, r.f1, r.auc, r.precision, r.recall)]
                + [r.averaging]
            )


def report_dict(report: MetricsReport) -> Dict[str, object]:
    return {
        "selector": report.selector,
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "auc": report.auc,
        "averaging": report.averaging,
        "per_class": report.per_class,
        "confusion": report.confusion.counts.tolist(),
        "config": report.config_fingerprint,
        "excluded_auc_classes": report.excluded_auc_classes,
    }


def write_report_json(path, reports: Sequence[MetricsReport]) -> None:
    ordered = _sorted_reports(reports)
    payload = {"reports": [report_dict(r) for r in ordered]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_confusion_csv(path, cm: ConfusionMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true\\predicted"] + [f"pred_{c}" for c in range(NUM_CLASSES)])
        for t in range(NUM_CLASSES):
            writer.writerow([f"true_{t}"] + [int(v) for v in cm.counts[t]])
