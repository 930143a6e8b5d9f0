"""Per-class recall, the AM measure and the balanced loss."""

from __future__ import annotations

import csv
import io
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvalReport:
    confusion: np.ndarray
    recalls: np.ndarray
    am: float
    balanced_risk: float
    accuracy: float
    fit_seconds: float | None = None
    predict_seconds: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]

    def to_dict(self) -> dict:
        out = {
            "confusion": self.confusion.tolist(),
            "recalls": [float(r) for r in self.recalls],
            "am": float(self.am),
            "balanced_risk": float(self.balanced_risk),
            "accuracy": float(self.accuracy),
            "fit_seconds": self.fit_seconds,
            "predict_seconds": self.predict_seconds,
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        row = {"am": self.am, "balanced_risk": self.balanced_risk, "accuracy": self.accuracy}
        row.update({f"recall_{m}": float(r) for m, r in enumerate(self.recalls, start=1)})
        row["fit_seconds"] = self.fit_seconds
        row["predict_seconds"] = self.predict_seconds
        return row


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    fields = list(dict.fromkeys(key for row in rows for key in row))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def confusion_matrix(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} true vs {p.shape} predicted")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 1 or arr.max() > n_classes):
            raise ValueError(f"{name} labels must lie in 1..{n_classes}")
    return np.bincount((t - 1) * n_classes + (p - 1),
                       minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def balanced_loss(true: int, pred: int, pi) -> float:
    """Misclassification cost ``1 / (M * pi_true)``; zero when correct."""
    pi = np.asarray(pi, dtype=np.float64)
    if pred == true:
        return 0.0
    return 1.0 / (pi.size * pi[true - 1])


def empirical_balanced_risk(true_labels, predicted_labels, n_classes: int) -> float:
    """Average balanced loss with ``pi`` set to the observed class frequencies."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    pi = np.bincount(t, minlength=n_classes + 1)[1:] / t.size
    losses = np.where(t != p, 1.0 / (n_classes * pi[t - 1]), 0.0)
    return float(losses.mean())


def evaluate(true_labels, predicted_labels, n_classes: int) -> EvalReport:
    cm = confusion_matrix(true_labels, predicted_labels, n_classes)
    support = cm.sum(axis=1)
    missing = np.flatnonzero(support == 0)
    if missing.size:
        raise ValueError(f"class {missing[0] + 1} does not occur in the true labels; "
                         "its recall is undefined")
    recalls = np.diag(cm) / support
    return EvalReport(
        confusion=cm,
        recalls=recalls,
        am=float(recalls.mean()),
        balanced_risk=empirical_balanced_risk(true_labels, predicted_labels, n_classes),
        accuracy=float(np.trace(cm) / cm.sum()),
    )


@contextmanager
def stopwatch():
    """Yield a one-element list that receives the elapsed monotonic seconds."""
    box = [0.0]
    t0 = time.perf_counter()
    try:
        yield box
    finally:
        box[0] = time.perf_counter() - t0
