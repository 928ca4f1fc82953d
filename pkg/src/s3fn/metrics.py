"""Confusion matrix, macro-averaged precision/recall/F1, and report files.

Per-class precision is TP/(TP+FP) and recall TP/(TP+FN); classes with a zero
denominator contribute 0 to the macro average and are flagged in the report.
The human-readable table lists columns in the order PR, Recall, F1, ACC with
one-decimal percentages; the machine format is key=value plus per-class and
confusion rows at full precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ShapeError

REPORT_MAGIC = "s3fn-report v1"


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[truth][prediction] over evaluated images."""

    counts: np.ndarray = field(repr=False)  # (U, U) non-negative ints

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise DataError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PerClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: tuple[PerClassMetrics, ...]
    confusion: ConfusionMatrix
    metadata: dict[str, str] = field(default_factory=dict)


def confusion_matrix(preds, truths, num_classes: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape or preds.ndim != 1:
        raise ShapeError("preds and truths must be 1-D and the same length")
    if preds.size and (
        preds.min() < 0
        or truths.min() < 0
        or preds.max() >= num_classes
        or truths.max() >= num_classes
    ):
        raise ShapeError(f"class index out of range for U={num_classes}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts=counts)


def summarize(
    cm: ConfusionMatrix, metadata: dict[str, str] | None = None
) -> EvalReport:
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise DataError("cannot summarize an empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    actual = counts.sum(axis=1).astype(np.float64)
    per_class = []
    for k in range(counts.shape[0]):
        zero_div = predicted[k] == 0 or actual[k] == 0
        precision = tp[k] / predicted[k] if predicted[k] > 0 else 0.0
        recall = tp[k] / actual[k] if actual[k] > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        per_class.append(
            PerClassMetrics(
                precision=float(precision),
                recall=float(recall),
                f1=float(f1),
                support=int(actual[k]),
                zero_division=bool(zero_div),
            )
        )
    return EvalReport(
        accuracy=float(tp.sum() / total),
        macro_precision=float(np.mean([m.precision for m in per_class])),
        macro_recall=float(np.mean([m.recall for m in per_class])),
        macro_f1=float(np.mean([m.f1 for m in per_class])),
        per_class=tuple(per_class),
        confusion=cm,
        metadata=dict(metadata or {}),
    )


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def format_report_table(report: EvalReport, class_names=None) -> str:
    """Human-readable table: macro PR / Recall / F1 / ACC plus per-class rows."""
    u = len(report.per_class)
    names = list(class_names) if class_names is not None else [
        f"class_{k}" for k in range(u)
    ]
    mode = report.metadata.get("mode", "model")
    lines = [
        f"{'model':<20} {'PR':>6} {'Recall':>6} {'F1':>6} {'ACC':>6}",
        f"{mode:<20} {_pct(report.macro_precision):>6} "
        f"{_pct(report.macro_recall):>6} {_pct(report.macro_f1):>6} "
        f"{_pct(report.accuracy):>6}",
        "",
        f"{'class':<20} {'PR':>6} {'Recall':>6} {'F1':>6} {'support':>8}",
    ]
    for name, m in zip(names, report.per_class):
        flag = " *" if m.zero_division else ""
        lines.append(
            f"{name:<20} {_pct(m.precision):>6} {_pct(m.recall):>6} "
            f"{_pct(m.f1):>6} {m.support:>8}{flag}"
        )
    if any(m.zero_division for m in report.per_class):
        lines.append("* undefined precision/recall counted as 0")
    return "\n".join(lines) + "\n"


def write_report(
    report: EvalReport,
    path: str | Path,
    fmt: str = "machine",
    class_names=None,
) -> None:
    path = Path(path)
    if fmt == "human":
        path.write_text(format_report_table(report, class_names), encoding="utf-8")
        return
    if fmt != "machine":
        raise DataError(f"unknown report format {fmt!r}")
    lines = [REPORT_MAGIC]
    for k, v in sorted(report.metadata.items()):
        lines.append(f"meta.{k}={v}")
    lines.append(f"classes={len(report.per_class)}")
    lines.append(f"total={report.confusion.total}")
    lines.append(f"accuracy={report.accuracy!r}")
    lines.append(f"macro_precision={report.macro_precision!r}")
    lines.append(f"macro_recall={report.macro_recall!r}")
    lines.append(f"macro_f1={report.macro_f1!r}")
    for k, m in enumerate(report.per_class):
        lines.append(
            f"class.{k}={m.precision!r},{m.recall!r},{m.f1!r},"
            f"{m.support},{int(m.zero_division)}"
        )
    for t, row in enumerate(report.confusion.counts):
        lines.append(f"confusion.{t}=" + ",".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report(path: str | Path) -> EvalReport:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != REPORT_MAGIC:
        raise FormatError(f"{path}: missing '{REPORT_MAGIC}' header")
    kv: dict[str, str] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"{path}: malformed line {line!r}")
        k, v = line.split("=", 1)
        kv[k] = v
    metadata = {
        k[len("meta.") :]: v for k, v in kv.items() if k.startswith("meta.")
    }
    u = int(kv["classes"])
    per_class = []
    for k in range(u):
        p, r, f1, support, zdiv = kv[f"class.{k}"].split(",")
        per_class.append(
            PerClassMetrics(
                precision=float(p),
                recall=float(r),
                f1=float(f1),
                support=int(support),
                zero_division=bool(int(zdiv)),
            )
        )
    counts = np.stack(
        [
            np.array([int(v) for v in kv[f"confusion.{t}"].split(",")])
            for t in range(u)
        ]
    )
    return EvalReport(
        accuracy=float(kv["accuracy"]),
        macro_precision=float(kv["macro_precision"]),
        macro_recall=float(kv["macro_recall"]),
        macro_f1=float(kv["macro_f1"]),
        per_class=tuple(per_class),
        confusion=ConfusionMatrix(counts=counts),
        metadata=metadata,
    )
