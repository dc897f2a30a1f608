"""Classification metrics, one-vs-rest ROC/PR curves, and latency timing.

Zero-division convention: precision, recall and F1 default to 0 and the
affected class is flagged. Macro averages run over the classes that
actually appear in the ground truth.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import schema
from .errors import LengthMismatch


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassReport:
    per_class: dict[int, ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    n_samples: int
    flags: list[str] = field(default_factory=list)


def confusion_matrix(true: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts matrix, rows = true class, cols = predicted class."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise LengthMismatch(f"true has {true.shape}, pred has {pred.shape}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def class_report(true, pred, n_classes: int | None = None) -> ClassReport:
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if len(true) != len(pred):
        raise LengthMismatch(f"{len(true)} labels vs {len(pred)} predictions")
    if len(true) == 0:
        raise LengthMismatch("empty label vector")
    if n_classes is None:
        n_classes = int(max(true.max(), pred.max())) + 1

    cm = confusion_matrix(true, pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    support = cm.sum(axis=1)

    flags: list[str] = []
    per_class: dict[int, ClassMetrics] = {}
    precisions = np.zeros(n_classes)
    recalls = np.zeros(n_classes)
    f1s = np.zeros(n_classes)
    for c in range(n_classes):
        denom_p = tp[c] + fp[c]
        denom_r = tp[c] + fn[c]
        p = tp[c] / denom_p if denom_p > 0 else 0.0
        r = tp[c] / denom_r if denom_r > 0 else 0.0
        if denom_p == 0 and support[c] > 0:
            flags.append(f"class {c}: no predictions, precision set to 0")
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        precisions[c], recalls[c], f1s[c] = p, r, f1
        per_class[c] = ClassMetrics(p, r, f1, int(support[c]))

    present = support > 0
    weights = support[present] / support[present].sum()
    return ClassReport(
        per_class=per_class,
        accuracy=float(tp.sum() / len(true)),
        macro_precision=float(precisions[present].mean()),
        macro_recall=float(recalls[present].mean()),
        macro_f1=float(f1s[present].mean()),
        weighted_precision=float((precisions[present] * weights).sum()),
        weighted_recall=float((recalls[present] * weights).sum()),
        weighted_f1=float((f1s[present] * weights).sum()),
        n_samples=len(true),
        flags=flags,
    )


def macro_f1(true, pred, n_classes: int | None = None) -> float:
    return class_report(true, pred, n_classes).macro_f1


def report_to_csv(report: ClassReport, path: str | Path,
                  class_names=schema.CLASS_NAMES) -> None:
    """Per-class rows in display order (attacks first, Benign last),
    then macro / weighted / accuracy rows."""
    order = [c for c in schema.REPORT_CLASS_ORDER if c in report.per_class]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        for c in order:
            m = report.per_class[c]
            writer.writerow([class_names[c], f"{m.precision:.3f}", f"{m.recall:.3f}",
                             f"{m.f1:.3f}", m.support])
        writer.writerow(["macro_avg", f"{report.macro_precision:.3f}",
                         f"{report.macro_recall:.3f}", f"{report.macro_f1:.3f}",
                         report.n_samples])
        writer.writerow(["weighted_avg", f"{report.weighted_precision:.3f}",
                         f"{report.weighted_recall:.3f}", f"{report.weighted_f1:.3f}",
                         report.n_samples])
        writer.writerow(["accuracy", "", "", f"{report.accuracy:.4f}", report.n_samples])


# -- ROC / PR curves -----------------------------------------------------------


@dataclass
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    precision: float
    recall: float


@dataclass
class ClassCurve:
    class_index: int
    points: list[CurvePoint]
    roc_auc: float


def roc_pr_points(true, scores: np.ndarray) -> tuple[dict[int, ClassCurve], list[str]]:
    """One-vs-rest curve points per class at every distinct score threshold.

    Classes absent from `true` (or without negatives) are skipped and
    flagged instead of producing a degenerate curve.
    """
    true = np.asarray(true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or len(true) != scores.shape[0]:
        raise LengthMismatch("scores must be (n_samples, n_classes)")

    curves: dict[int, ClassCurve] = {}
    flags: list[str] = []
    for c in range(scores.shape[1]):
        positives = true == c
        n_pos = int(positives.sum())
        n_neg = len(true) - n_pos
        if n_pos == 0 or n_neg == 0:
            flags.append(f"class {c}: degenerate (pos={n_pos}, neg={n_neg}), skipped")
            continue

        s = scores[:, c]
        order = np.argsort(-s, kind="stable")
        sorted_pos = positives[order].astype(np.float64)
        tp_cum = np.cumsum(sorted_pos)
        fp_cum = np.cumsum(1.0 - sorted_pos)
        sorted_scores = s[order]
        # Last index of each run of equal scores = state after applying
        # threshold == that score (predict positive where score >= t).
        distinct = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]

        points = [CurvePoint(float("inf"), 0.0, 0.0, 0.0, 0.0)]
        for i in distinct:
            tp, fp = tp_cum[i], fp_cum[i]
            points.append(CurvePoint(
                threshold=float(sorted_scores[i]),
                tpr=float(tp / n_pos),
                fpr=float(fp / n_neg),
                precision=float(tp / (tp + fp)),
                recall=float(tp / n_pos),
            ))
        if points[-1].tpr != 1.0 or points[-1].fpr != 1.0:
            points.append(CurvePoint(float("-inf"), 1.0, 1.0, n_pos / len(true), 1.0))

        fprs = np.array([p.fpr for p in points])
        tprs = np.array([p.tpr for p in points])
        curves[c] = ClassCurve(c, points, roc_auc=float(np.trapezoid(tprs, fprs)))
    return curves, flags


def curves_to_csv(curves: dict[int, ClassCurve], path: str | Path,
                  class_names=schema.CLASS_NAMES) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "threshold", "tpr", "fpr", "precision", "recall", "roc_auc"])
        for c, curve in sorted(curves.items()):
            for p in curve.points:
                writer.writerow([class_names[c], repr(p.threshold), repr(p.tpr),
                                 repr(p.fpr), repr(p.precision), repr(p.recall),
                                 repr(curve.roc_auc)])


# -- inference latency ---------------------------------------------------------


@dataclass
class LatencyReport:
    median_ms: float
    p95_ms: float
    samples_ms: list[float]

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "n_samples": len(self.samples_ms),
            "samples_ms": self.samples_ms,
        }, sort_keys=True))


def latency_bench(predict_one, rows: np.ndarray, n: int = 200,
                  warmup: int = 20) -> LatencyReport:
    """Time `predict_one(row)` on `n` single rows after `warmup` calls.

    Strictly single-threaded; uses the monotonic high-resolution clock.
    """
    if n > len(rows):
        raise ValueError(f"n={n} exceeds available rows {len(rows)}")
    for i in range(warmup):
        predict_one(rows[i % len(rows)])
    samples = []
    for i in range(n):
        start = time.perf_counter()
        predict_one(rows[i])
        samples.append((time.perf_counter() - start) * 1000.0)
    arr = np.asarray(samples)
    return LatencyReport(
        median_ms=float(np.median(arr)),
        p95_ms=float(np.percentile(arr, 95)),
        samples_ms=samples,
    )
