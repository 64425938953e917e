"""Confusion matrices, per-class P/R/F1, macro and tail aggregates.

The 0/0 convention maps any undefined precision/recall/F1 to 0 so macro
averages stay defined when a rare class is absent from a split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ClassRegistry
from .errors import AlignmentError, ConfigError

# Tail classes for TailMacroF1: the rare maturation stages and lineages.
DEFAULT_TAIL_CLASSES = ("BNE", "PLY", "VLY", "MMY", "PMY", "MY", "PC")

# Morphology boundaries reported by default: adjacent maturation stages.
DEFAULT_BOUNDARY_PAIRS = (("BNE", "SNE"), ("MMY", "MY"), ("PMY", "MMY"))


def confusion(y_true: np.ndarray, y_pred: np.ndarray, C: int) -> np.ndarray:
    """C x C counts; rows are true classes, columns are predictions."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise AlignmentError("y_true and y_pred lengths differ")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= C or y_pred.min() < 0 or y_pred.max() >= C
    ):
        raise ConfigError("label outside [0, C)")
    cm = np.zeros((C, C), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def per_class_prf(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class (precision, recall, f1) with the 0/0 -> 0 convention."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, f1


def _sequential_mean(values: np.ndarray) -> float:
    # left-to-right summation: bit-for-bit reproducible and oracle-matchable
    total = 0.0
    for v in values.tolist():
        total += v
    return total / len(values)


def macro_f1(cm: np.ndarray) -> float:
    _, _, f1 = per_class_prf(cm)
    return _sequential_mean(f1)


def tail_macro_f1(cm: np.ndarray, tail_idx: Sequence[int]) -> float:
    if len(tail_idx) == 0:
        raise ConfigError("tail set may not be empty")
    _, _, f1 = per_class_prf(cm)
    return _sequential_mean(f1[np.asarray(tail_idx, dtype=np.int64)])


def tail_composite(macro: float, tail: float) -> float:
    return (macro + tail) / 2.0


def tail_indices(registry: ClassRegistry,
                 tail_names: Sequence[str] = DEFAULT_TAIL_CLASSES) -> list[int]:
    return [registry.index(name) for name in tail_names]


@dataclass
class MetricReport:
    registry: ClassRegistry
    cm: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    tail_macro_f1: float
    tail_composite: float
    tail_names: tuple[str, ...]

    def to_dict(self) -> dict:
        per_class = {
            name: {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.cm[i].sum()),
            }
            for i, name in enumerate(self.registry.names)
        }
        return {
            "per_class": per_class,
            "macro_f1": self.macro_f1,
            "tail_macro_f1": self.tail_macro_f1,
            "tail_composite": self.tail_composite,
            "tail_classes": list(self.tail_names),
            "n": int(self.cm.sum()),
        }


def build_report(y_true: np.ndarray, y_pred: np.ndarray, registry: ClassRegistry,
                 tail_names: Sequence[str] = DEFAULT_TAIL_CLASSES) -> MetricReport:
    cm = confusion(y_true, y_pred, registry.C)
    precision, recall, f1 = per_class_prf(cm)
    macro = _sequential_mean(f1)
    tail = tail_macro_f1(cm, tail_indices(registry, tail_names))
    return MetricReport(
        registry=registry, cm=cm, precision=precision, recall=recall, f1=f1,
        macro_f1=macro, tail_macro_f1=tail, tail_composite=tail_composite(macro, tail),
        tail_names=tuple(tail_names),
    )


@dataclass
class BoundaryReport:
    pair: tuple[str, str]
    f1_a: float
    f1_b: float
    mean_f1: float
    a_as_b: int          # true a predicted b
    b_as_a: int          # true b predicted a
    n: int

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair), "f1_a": self.f1_a, "f1_b": self.f1_b,
            "mean_f1": self.mean_f1, "a_as_b": self.a_as_b, "b_as_a": self.b_as_a,
            "n": self.n,
        }


def boundary_report(y_true: np.ndarray, y_pred: np.ndarray, a: int, b: int,
                    registry: ClassRegistry) -> BoundaryReport:
    """Metrics restricted to true labels in {a, b}; off-pair predictions count as errors."""
    if a == b:
        raise ConfigError("boundary pair classes must differ")
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    mask = (y_true == a) | (y_true == b)
    if not mask.any():
        raise ConfigError("boundary subset is empty")
    t, p = y_true[mask], y_pred[mask]
    cm = confusion(t, p, registry.C)
    _, _, f1 = per_class_prf(cm)
    return BoundaryReport(
        pair=(registry.names[a], registry.names[b]),
        f1_a=float(f1[a]), f1_b=float(f1[b]),
        mean_f1=float((f1[a] + f1[b]) / 2.0),
        a_as_b=int(cm[a, b]), b_as_a=int(cm[b, a]),
        n=int(mask.sum()),
    )


def write_report_json(report: MetricReport, path: Path | str,
                      boundaries: Sequence[BoundaryReport] = ()) -> None:
    payload = report.to_dict()
    if boundaries:
        payload["boundaries"] = [b.to_dict() for b in boundaries]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_confusion_csv(cm: np.ndarray, registry: ClassRegistry, path: Path | str) -> None:
    """Confusion matrix with class-name header row and column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred", *registry.names])
        for i, name in enumerate(registry.names):
            writer.writerow([name, *(int(x) for x in cm[i])])
