"""Classification metrics: confusion matrix, OA, AA, and wall-clock timing."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "EvalError",
    "ConfusionMatrix",
    "EvalReport",
    "confusion",
    "overall_accuracy",
    "average_accuracy",
    "per_class_accuracy",
    "run_timed",
    "evaluate",
    "REPORT_COLUMNS",
    "write_report_csv",
]


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_labels: list[int]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true_labels, predicted_labels, class_labels) -> ConfusionMatrix:
    t = np.asarray(true_labels).ravel()
    p = np.asarray(predicted_labels).ravel()
    if t.size != p.size:
        raise EvalError(f"length mismatch: {t.size} true vs {p.size} predicted labels")
    if t.size == 0:
        raise EvalError("cannot build a confusion matrix from zero samples")
    classes = [int(c) for c in class_labels]
    index = {c: i for i, c in enumerate(classes)}
    for name, arr in (("true", t), ("predicted", p)):
        unknown = sorted(set(np.unique(arr).tolist()) - index.keys())
        if unknown:
            raise EvalError(f"unknown {name} label {unknown[0]}")
    ti = np.array([index[int(v)] for v in t])
    pi = np.array([index[int(v)] for v in p])
    n = len(classes)
    counts = np.bincount(ti * n + pi, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(counts, classes)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EvalError("empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def per_class_accuracy(cm: ConfusionMatrix) -> np.ndarray:
    rows = cm.counts.sum(axis=1)
    if np.any(rows == 0):
        missing = cm.class_labels[int(np.flatnonzero(rows == 0)[0])]
        raise EvalError(f"class {missing} never appears in test set")
    return np.diag(cm.counts) / rows


def average_accuracy(cm: ConfusionMatrix) -> float:
    return float(per_class_accuracy(cm).mean())


def run_timed(task, *args, **kwargs):
    """Run ``task(*args, **kwargs)``; return ``(result, elapsed_seconds)`` on the monotonic clock."""
    start = time.perf_counter()
    result = task(*args, **kwargs)
    return result, time.perf_counter() - start


@dataclass
class EvalReport:
    oa: float
    aa: float
    per_class: list[float]
    class_labels: list[int]
    confusion: list[list[int]]
    elapsed_seconds: float = 0.0
    selected_band_count: int = 0
    train_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "oa": self.oa,
            "aa": self.aa,
            "oa_pct": round(100 * self.oa, 2),
            "aa_pct": round(100 * self.aa, 2),
            "per_class": dict(zip(map(str, self.class_labels), self.per_class)),
            "confusion": self.confusion,
            "selected_band_count": self.selected_band_count,
            "train_fraction": self.train_fraction,
            **self.extra,
        }
        if include_timing:
            d["elapsed_seconds"] = self.elapsed_seconds
        return d


def evaluate(true_labels, predicted_labels, class_labels, **meta) -> EvalReport:
    cm = confusion(true_labels, predicted_labels, class_labels)
    per_class = per_class_accuracy(cm)
    return EvalReport(
        oa=overall_accuracy(cm),
        aa=float(per_class.mean()),
        per_class=per_class.tolist(),
        class_labels=cm.class_labels,
        confusion=cm.counts.tolist(),
        **meta,
    )


REPORT_COLUMNS = ["method", "k", "train_fraction", "oa_pct", "aa_pct", "time_s"]


def write_report_csv(rows, path) -> None:
    """Write one row per (method, k, train_fraction) run."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row[key] for key in REPORT_COLUMNS})
