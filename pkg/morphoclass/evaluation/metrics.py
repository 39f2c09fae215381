from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix as _sk_confusion_matrix

from ..data.dataset import ClassLabel
from ..errors import EvaluationError

logger = logging.getLogger(__name__)

STRATEGIES = ("fc", "knn")


@dataclass(slots=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes, both in ordinal order."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise EvaluationError(f"Confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise EvaluationError("Confusion matrix counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(slots=True)
class MetricsReport:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    model_tag: str = ""
    eval_strategy: str = ""
    confusion: ConfusionMatrix | None = None
    seed: int | None = None
    checkpoint_hash: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model_tag,
            "eval_strategy": self.eval_strategy,
            "per_class": {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "confusion": self.confusion.to_list() if self.confusion is not None else None,
            "seed": self.seed,
            "checkpoint_hash": self.checkpoint_hash,
            **self.extra,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "MetricsReport":
        known = {
            "model",
            "eval_strategy",
            "per_class",
            "macro",
            "accuracy",
            "confusion",
            "seed",
            "checkpoint_hash",
        }
        confusion = data.get("confusion")
        return cls(
            precision=list(data["per_class"]["precision"]),
            recall=list(data["per_class"]["recall"]),
            f1=list(data["per_class"]["f1"]),
            macro_precision=data["macro"]["precision"],
            macro_recall=data["macro"]["recall"],
            macro_f1=data["macro"]["f1"],
            accuracy=data["accuracy"],
            model_tag=data.get("model", ""),
            eval_strategy=data.get("eval_strategy", ""),
            confusion=ConfusionMatrix(confusion) if confusion is not None else None,
            seed=data.get("seed"),
            checkpoint_hash=data.get("checkpoint_hash"),
            extra={k: v for k, v in data.items() if k not in known},
        )


def confusion_matrix(
    true_labels: Sequence[ClassLabel | int],
    predicted_labels: Sequence[ClassLabel | int],
    num_classes: int = len(ClassLabel),
) -> ConfusionMatrix:
    if len(true_labels) != len(predicted_labels):
        raise EvaluationError(
            f"{len(true_labels)} true labels but {len(predicted_labels)} predictions"
        )
    true = [int(v) for v in true_labels]
    pred = [int(v) for v in predicted_labels]
    if any(v < 0 or v >= num_classes for v in true + pred):
        raise EvaluationError(f"Labels must be class ordinals 0..{num_classes - 1}")
    if not true:
        return ConfusionMatrix(np.zeros((num_classes, num_classes), dtype=np.int64))
    return ConfusionMatrix(_sk_confusion_matrix(true, pred, labels=list(range(num_classes))))


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray, what: str) -> np.ndarray:
    empty = denominator == 0
    if empty.any():
        logger.warning(
            "%s undefined for class(es) %s; reporting 0",
            what,
            ", ".join(str(i) for i in np.flatnonzero(empty)),
        )
    out = np.zeros(numerator.shape, dtype=np.float64)
    np.divide(numerator, denominator, out=out, where=~empty)
    return out


def compute_metrics(
    cm: ConfusionMatrix, model_tag: str = "", eval_strategy: str = ""
) -> MetricsReport:
    if cm.total == 0:
        raise EvaluationError("Cannot compute metrics from an all-zero confusion matrix")

    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    precision = _safe_ratio(diag, counts.sum(axis=0), "Precision")
    recall = _safe_ratio(diag, counts.sum(axis=1), "Recall")
    denom = precision + recall
    f1 = np.zeros_like(denom)
    np.divide(2 * precision * recall, denom, out=f1, where=denom > 0)

    return MetricsReport(
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        accuracy=float(diag.sum() / counts.sum()),
        model_tag=model_tag,
        eval_strategy=eval_strategy,
        confusion=cm,
    )


def write_metrics(report: MetricsReport, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
    return out


def read_metrics(path: str | Path) -> MetricsReport:
    src = Path(path)
    try:
        return MetricsReport.from_json(json.loads(src.read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError) as exc:
        raise EvaluationError(f"Cannot read metrics file {src}: {exc}") from exc


def format_report(report: MetricsReport) -> str:
    lines = [f"{report.model_tag} ({report.eval_strategy})"]
    lines.append(f"{'Class':<10}{'Precision':>11}{'Recall':>9}{'F1':>9}")
    for label in ClassLabel:
        i = int(label)
        lines.append(
            f"{label.display_name:<10}{report.precision[i]:>11.4f}"
            f"{report.recall[i]:>9.4f}{report.f1[i]:>9.4f}"
        )
    lines.append(
        f"{'Macro':<10}{report.macro_precision:>11.4f}"
        f"{report.macro_recall:>9.4f}{report.macro_f1:>9.4f}"
    )
    lines.append(f"Accuracy  {report.accuracy:.4f}")
    return "\n".join(lines)
