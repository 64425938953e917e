"""Expert label-review workflow: case extraction, verdicts, summaries, heatmap.

Discordant cases (top-1 prediction != assigned label) are reviewed one by one;
a class-stratified sample of agreement cases checks that label noise is not
confined to disagreements. Verdicts land in an append-only newline-delimited
log with last-write-wins per (case, reviewer), so state is crash-safe and
replayable.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .data import ClassRegistry
from .ensemble import PredictionSet
from .errors import (AlignmentError, ConfigError, DataFormatError,
                     UnknownCaseError, VerdictRuleError)

ORIGIN_DISCORDANT = "discordant"
ORIGIN_AGREEMENT = "agreement_sample"

DISCORDANT_CATEGORIES = ("label_error", "model_error", "ambiguous")
AGREEMENT_CATEGORIES = ("label_error", "ambiguous", "confirmed_correct")

CATEGORIES_BY_ORIGIN = {
    ORIGIN_DISCORDANT: DISCORDANT_CATEGORIES,
    ORIGIN_AGREEMENT: AGREEMENT_CATEGORIES,
}


@dataclass
class AuditCase:
    id: str
    image_ref: str
    assigned_label: int
    top3: list[tuple[int, float]]       # (class index, probability), descending
    margin: float
    origin: str
    split: str

    def to_dict(self, registry: ClassRegistry) -> dict:
        return {
            "id": self.id,
            "image_ref": self.image_ref,
            "assigned_label": registry.names[self.assigned_label],
            "top3": [
                {"class": registry.names[c], "prob": float(p)} for c, p in self.top3
            ],
            "margin": float(self.margin),
            "origin": self.origin,
            "split": self.split,
        }


def _top3_and_margin(prob_row: np.ndarray) -> tuple[list[tuple[int, float]], float]:
    # Stable sort keeps the lowest class index first among tied probabilities.
    order = np.argsort(-prob_row, kind="stable")[:3]
    top3 = [(int(c), float(prob_row[c])) for c in order]
    margin = top3[0][1] - top3[1][1] if len(top3) > 1 else top3[0][1]
    return top3, margin


def build_cases(preds: PredictionSet, labels: np.ndarray,
                image_refs: Sequence[str] | None, split: str) -> list[AuditCase]:
    """All discordant samples, most uncertain (smallest margin) first."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != preds.n:
        raise AlignmentError("labels and predictions have different lengths")
    if image_refs is not None and len(image_refs) != preds.n:
        raise AlignmentError("image_refs and predictions have different lengths")
    probs = preds.probs
    top1 = preds.top1
    cases = []
    for i in np.flatnonzero(top1 != labels):
        top3, margin = _top3_and_margin(probs[i])
        cases.append(AuditCase(
            id=preds.ids[i],
            image_ref=image_refs[i] if image_refs is not None else "",
            assigned_label=int(labels[i]),
            top3=top3,
            margin=margin,
            origin=ORIGIN_DISCORDANT,
            split=split,
        ))
    cases.sort(key=lambda c: (c.margin, c.id))
    return cases


def sample_agreement_cases(preds: PredictionSet, labels: np.ndarray,
                           image_refs: Sequence[str] | None, split: str,
                           per_class_n: int, seed: int) -> list[AuditCase]:
    """Class-stratified concordant sample, without replacement, seeded."""
    if per_class_n < 0:
        raise ConfigError("per_class_n must be >= 0")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != preds.n:
        raise AlignmentError("labels and predictions have different lengths")
    if per_class_n == 0 or preds.n == 0:
        return []
    probs = preds.probs
    top1 = preds.top1
    rng = np.random.default_rng(seed)
    C = preds.logits.shape[1]
    chosen: list[int] = []
    for c in range(C):
        pool = np.flatnonzero((labels == c) & (top1 == labels))
        if pool.size == 0:
            continue
        take = min(per_class_n, pool.size)
        chosen.extend(rng.choice(pool, size=take, replace=False).tolist())
    cases = []
    for i in chosen:
        top3, margin = _top3_and_margin(probs[i])
        cases.append(AuditCase(
            id=preds.ids[i],
            image_ref=image_refs[i] if image_refs is not None else "",
            assigned_label=int(labels[i]),
            top3=top3,
            margin=margin,
            origin=ORIGIN_AGREEMENT,
            split=split,
        ))
    cases.sort(key=lambda c: (c.margin, c.id))
    return cases


def write_cases_json(cases: Iterable[AuditCase], registry: ClassRegistry,
                     path: Path | str) -> None:
    payload = {"classes": list(registry.names),
               "cases": [c.to_dict(registry) for c in cases]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_cases_json(path: Path | str) -> tuple[ClassRegistry, list[AuditCase]]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"case file is not valid JSON: {exc}") from None
    registry = ClassRegistry(tuple(payload["classes"]))
    cases = []
    for item in payload["cases"]:
        cases.append(AuditCase(
            id=item["id"],
            image_ref=item.get("image_ref", ""),
            assigned_label=registry.index(item["assigned_label"]),
            top3=[(registry.index(t["class"]), float(t["prob"])) for t in item["top3"]],
            margin=float(item["margin"]),
            origin=item["origin"],
            split=item["split"],
        ))
    return registry, cases


@dataclass
class Verdict:
    case_id: str
    category: str
    reviewer: str
    ts: float
    corrected_label: str | None = None

    def to_dict(self) -> dict:
        record = {"case_id": self.case_id, "category": self.category,
                  "reviewer": self.reviewer, "ts": self.ts}
        if self.corrected_label is not None:
            record["corrected_label"] = self.corrected_label
        return record


def validate_verdict(verdict: Verdict, case: AuditCase) -> None:
    allowed = CATEGORIES_BY_ORIGIN[case.origin]
    if verdict.category not in allowed:
        raise VerdictRuleError(
            f"category {verdict.category!r} not allowed for {case.origin} cases")
    if verdict.category == "label_error" and verdict.corrected_label is None:
        raise VerdictRuleError("label_error verdicts require corrected_label")
    if verdict.category != "label_error" and verdict.corrected_label is not None:
        raise VerdictRuleError("corrected_label only applies to label_error verdicts")


class VerdictStore:
    """Append-only verdict log with serialized writes.

    All verdicts are retained as history; the active verdict per case is the
    most recent one (by append order), which also implements last-write-wins
    per (case, reviewer).
    """

    def __init__(self, path: Path | str | None = None):
        self.path = Path(path) if path is not None else None
        self.history: list[Verdict] = []
        self._lock = threading.Lock()
        self._fh: IO[str] | None = None
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self.history.append(self._parse(line))

    @staticmethod
    def _parse(line: str) -> Verdict:
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"bad verdict log line: {exc}") from None
        return Verdict(
            case_id=record["case_id"], category=record["category"],
            reviewer=record["reviewer"], ts=float(record["ts"]),
            corrected_label=record.get("corrected_label"),
        )

    def append(self, verdict: Verdict) -> None:
        """Durably append: the record is flushed and fsynced before returning."""
        with self._lock:
            if self.path is not None:
                if self._fh is None:
                    self._fh = open(self.path, "a", encoding="utf-8")
                self._fh.write(json.dumps(verdict.to_dict(), sort_keys=True) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            self.history.append(verdict)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def active(self) -> dict[str, Verdict]:
        """Most recent verdict per case across all reviewers."""
        out: dict[str, Verdict] = {}
        for v in self.history:
            out[v.case_id] = v
        return out

    def active_per_reviewer(self) -> dict[tuple[str, str], Verdict]:
        out: dict[tuple[str, str], Verdict] = {}
        for v in self.history:
            out[(v.case_id, v.reviewer)] = v
        return out


def record_verdict(store: VerdictStore, cases: dict[str, AuditCase],
                   verdict: Verdict) -> None:
    """Validate against the case catalog, then durably append."""
    case = cases.get(verdict.case_id)
    if case is None:
        raise UnknownCaseError(f"unknown case id: {verdict.case_id!r}")
    validate_verdict(verdict, case)
    store.append(verdict)


@dataclass
class SummaryRow:
    origin: str
    split: str                     # split tag or "combined"
    n_cases: int
    n_reviewed: int
    n_pending: int
    counts: dict[str, int]
    pct: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "origin": self.origin, "split": self.split, "n_cases": self.n_cases,
            "n_reviewed": self.n_reviewed, "n_pending": self.n_pending,
            "counts": self.counts, "pct": self.pct,
        }


def summarize(store: VerdictStore, cases: Sequence[AuditCase]) -> list[SummaryRow]:
    """Per-split and combined rows for each case origin, Table-style."""
    active = store.active()
    rows: list[SummaryRow] = []
    for origin, categories in CATEGORIES_BY_ORIGIN.items():
        subset = [c for c in cases if c.origin == origin]
        if not subset:
            continue
        splits = sorted({c.split for c in subset})
        groups = [(s, [c for c in subset if c.split == s]) for s in splits]
        if len(splits) > 1:
            groups.append(("combined", subset))
        for split, group in groups:
            counts = {cat: 0 for cat in categories}
            reviewed = 0
            for case in group:
                verdict = active.get(case.id)
                if verdict is None:
                    continue
                reviewed += 1
                counts[verdict.category] += 1
            pct = {
                cat: (counts[cat] / reviewed if reviewed else 0.0)
                for cat in categories
            }
            rows.append(SummaryRow(
                origin=origin, split=split, n_cases=len(group),
                n_reviewed=reviewed, n_pending=len(group) - reviewed,
                counts=counts, pct=pct,
            ))
    return rows


def per_class_noise_rates(store: VerdictStore, cases: Sequence[AuditCase],
                          registry: ClassRegistry) -> dict[str, dict]:
    """Label-error rate per assigned class among reviewed agreement cases.

    The denominator is whatever was actually sampled and reviewed per class,
    so rates are only comparable within one sampling configuration.
    """
    active = store.active()
    out: dict[str, dict] = {}
    for case in cases:
        if case.origin != ORIGIN_AGREEMENT:
            continue
        verdict = active.get(case.id)
        if verdict is None:
            continue
        name = registry.names[case.assigned_label]
        slot = out.setdefault(name, {"reviewed": 0, "label_error": 0, "rate": 0.0})
        slot["reviewed"] += 1
        slot["label_error"] += int(verdict.category == "label_error")
    for slot in out.values():
        slot["rate"] = slot["label_error"] / slot["reviewed"]
    return out


@dataclass
class DirectionalMatrix:
    """Cell (i, j): label errors / reviewed disagreements with assigned=i, top1=j."""

    errors: np.ndarray             # (C, C) int
    reviewed: np.ndarray           # (C, C) int
    rate: np.ndarray               # (C, C) float, 0 where nothing reviewed

    def to_dict(self, registry: ClassRegistry) -> dict:
        return {
            "classes": list(registry.names),
            "errors": self.errors.tolist(),
            "reviewed": self.reviewed.tolist(),
            "rate": self.rate.tolist(),
        }


def directional_matrix(store: VerdictStore, cases: Sequence[AuditCase],
                       C: int) -> DirectionalMatrix:
    """Directional label-noise analysis over reviewed discordant cases."""
    active = store.active()
    errors = np.zeros((C, C), dtype=np.int64)
    reviewed = np.zeros((C, C), dtype=np.int64)
    for case in cases:
        if case.origin != ORIGIN_DISCORDANT:
            continue
        verdict = active.get(case.id)
        if verdict is None:
            continue
        i, j = case.assigned_label, case.top3[0][0]
        reviewed[i, j] += 1
        if verdict.category == "label_error":
            errors[i, j] += 1
    rate = np.divide(errors, reviewed, out=np.zeros((C, C)), where=reviewed > 0)
    return DirectionalMatrix(errors=errors, reviewed=reviewed, rate=rate)
