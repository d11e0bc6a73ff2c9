"""Forecast and classification metrics plus report formatting.

MAPE refuses zero actual values outright (synthetic currents are strictly
positive, so a zero means the generator is broken, not that the metric
should skip a point). Precision/recall with an empty denominator are
reported as undefined rather than coerced to 0 or 1, and undefined
entries stay out of macro averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector
from .data import CLASS_ORDER, N_CLASSES
from .errors import DataFormatError


def _paired(actual, predicted):
    a = as_float_vector(actual, "actual")
    p = as_float_vector(predicted, "predicted")
    if a.size != p.size:
        raise DataFormatError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    return a, p


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    a, p = _paired(actual, predicted)
    zeros = np.flatnonzero(a == 0)
    if zeros.size:
        raise DataFormatError(
            f"mape is undefined: actual value at index {int(zeros[0])} is zero"
        )
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def rmse(actual, predicted) -> float:
    """Root mean square error, in the inputs' units."""
    a, p = _paired(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


@dataclass
class ClassificationReport:
    """Confusion matrix with per-class precision/recall and overall accuracy.

    confusion[i, j] counts rows whose true class is i and predicted class
    is j. Undefined precision/recall (zero denominator) is None.
    """

    confusion: np.ndarray
    precision: list[float | None]
    recall: list[float | None]
    accuracy: float

    def macro_precision(self) -> float | None:
        defined = [v for v in self.precision if v is not None]
        return float(np.mean(defined)) if defined else None

    def macro_recall(self) -> float | None:
        defined = [v for v in self.recall if v is not None]
        return float(np.mean(defined)) if defined else None

    def as_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "per_class": {
                cls.value: {"precision": self.precision[k], "recall": self.recall[k]}
                for k, cls in enumerate(CLASS_ORDER)
            },
            "macro_precision": self.macro_precision(),
            "macro_recall": self.macro_recall(),
        }


def confusion_and_prf(true_labels, predicted_labels) -> ClassificationReport:
    """Confusion matrix, per-class precision/recall, and accuracy.

    Labels are integer class indices in [0, 5).
    """
    t = np.asarray(true_labels, dtype=np.intp)
    p = np.asarray(predicted_labels, dtype=np.intp)
    if t.size != p.size:
        raise DataFormatError(f"length mismatch: {t.size} true vs {p.size} predicted")
    if t.size == 0:
        raise DataFormatError("need at least one labeled pair")
    for arr, name in ((t, "true"), (p, "predicted")):
        if arr.min() < 0 or arr.max() >= N_CLASSES:
            raise DataFormatError(f"{name} labels must lie in [0, {N_CLASSES})")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (t, p), 1)
    precision: list[float | None] = []
    recall: list[float | None] = []
    for k in range(N_CLASSES):
        tp = confusion[k, k]
        predicted_k = confusion[:, k].sum()
        true_k = confusion[k, :].sum()
        precision.append(float(tp / predicted_k) if predicted_k else None)
        recall.append(float(tp / true_k) if true_k else None)
    accuracy = float(np.trace(confusion) / t.size)
    return ClassificationReport(confusion, precision, recall, accuracy)


def format_table(headers: list[str], rows: list[list], float_digits: int = 4) -> str:
    """Fixed-width text table; None renders as 'undefined'."""

    def cell(v):
        if v is None:
            return "undefined"
        if isinstance(v, float):
            return f"{v:.{float_digits}f}"
        return str(v)

    text_rows = [[cell(v) for v in row] for row in rows]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in text_rows)) if text_rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for r in text_rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)


def forecast_comparison_table(rows: list[dict]) -> str:
    """Variable x method table of MAPE/RMSE results."""
    return format_table(
        ["Variable", "Method", "MAPE %", "RMSE"],
        [[r["variable"], r["method"], r["mape"], r["rmse"]] for r in rows],
    )


def classification_table(report: ClassificationReport) -> str:
    rows = []
    for k, cls in enumerate(CLASS_ORDER):
        rows.append([cls.value, report.precision[k], report.recall[k]])
    table = format_table(["Class", "Precision", "Recall"], rows)
    return f"{table}\nOverall accuracy: {report.accuracy:.4f}"
