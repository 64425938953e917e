"""Logit averaging, the agreement-gated override rule, and pair discovery.

The override rule replaces the primary model's prediction on a sample only
when both advisors agree with each other and the ordered (primary, advisor)
class pair belongs to a pre-validated set. Pair discovery scores every
ordered pair by the validation MacroF1 change of applying it alone and keeps
the strictly positive ones.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ClassRegistry
from .errors import AlignmentError, ConfigError, DataFormatError
from .metrics import confusion, macro_f1
from .numerics import softmax

# Override pairs shipped as defaults: (primary, agreed-advisor) transitions
# between morphologically adjacent classes.
DEFAULT_OVERRIDE_PAIRS = (("BNE", "SNE"), ("MO", "VLY"), ("MY", "MMY"), ("LY", "BL"))


@dataclass
class PredictionSet:
    """Aligned per-sample logits for one model on one split."""

    ids: list[str]
    logits: np.ndarray            # (n, C)
    source: str = ""

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise ConfigError("logits must be 2-dimensional")
        if len(self.ids) != self.logits.shape[0]:
            raise AlignmentError("ids and logits row count differ")

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    @property
    def top1(self) -> np.ndarray:
        return np.argmax(self.logits, axis=1)


def _check_aligned(sets: Sequence[PredictionSet]) -> None:
    first = sets[0]
    for other in sets[1:]:
        if other.ids != first.ids:
            raise AlignmentError(f"prediction sets misaligned: {first.source!r} vs {other.source!r}")
        if other.logits.shape != first.logits.shape:
            raise AlignmentError("prediction sets have different logit shapes")


def average_logits(sets: Sequence[PredictionSet],
                   weights: Sequence[float] | None = None) -> PredictionSet:
    """Weighted mean of aligned logit sets (TTA views or model ensembles)."""
    if not sets:
        raise ConfigError("need at least one prediction set")
    _check_aligned(sets)
    if weights is None:
        weights = [1.0] * len(sets)
    w = np.asarray(list(weights), dtype=np.float64)
    if w.shape[0] != len(sets):
        raise ConfigError("one weight per prediction set required")
    if (w < 0).any() or w.sum() == 0:
        raise ConfigError("weights must be >= 0 and not all zero")
    stacked = np.stack([s.logits for s in sets])
    merged = np.tensordot(w, stacked, axes=1) / w.sum()
    source = "avg(" + ",".join(s.source or "?" for s in sets) + ")"
    return PredictionSet(ids=list(sets[0].ids), logits=merged, source=source)


@dataclass(frozen=True)
class ConfusionPair:
    src: int
    dst: int
    delta: float = 0.0
    support: int = 0


@dataclass
class PairSet:
    """Ordered confusion pairs; duplicates forbidden, order meaningful."""

    pairs: list[ConfusionPair] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for p in self.pairs:
            if p.src == p.dst:
                raise ConfigError("pair classes must differ")
            if (p.src, p.dst) in seen:
                raise ConfigError(f"duplicate ordered pair ({p.src}, {p.dst})")
            seen.add((p.src, p.dst))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def as_lookup(self) -> dict[tuple[int, int], ConfusionPair]:
        return {(p.src, p.dst): p for p in self.pairs}


def default_pairs(registry: ClassRegistry) -> PairSet:
    return PairSet([
        ConfusionPair(registry.index(a), registry.index(b))
        for a, b in DEFAULT_OVERRIDE_PAIRS
    ])


def apply_override(primary: np.ndarray, a1: np.ndarray, a2: np.ndarray,
                   pairs: PairSet) -> np.ndarray:
    """Label-level override: advisor agreement plus a listed (primary, advisor) pair."""
    primary = np.asarray(primary)
    gate = (a1 == a2)
    out = primary.copy()
    for p in pairs:
        hit = gate & (primary == p.src) & (a1 == p.dst)
        out[hit] = p.dst
    return out


@dataclass
class OverrideRecord:
    id: str
    from_class: int
    to_class: int

    def to_dict(self, registry: ClassRegistry | None = None) -> dict:
        if registry is not None:
            return {"id": self.id, "from_class": registry.names[self.from_class],
                    "to_class": registry.names[self.to_class],
                    "pair": [registry.names[self.from_class], registry.names[self.to_class]]}
        return {"id": self.id, "from_class": int(self.from_class),
                "to_class": int(self.to_class),
                "pair": [int(self.from_class), int(self.to_class)]}


@dataclass
class OverrideLog:
    records: list[OverrideRecord]
    total: int

    @property
    def modified(self) -> int:
        return len(self.records)

    @property
    def rate(self) -> float:
        return self.modified / self.total if self.total else 0.0


def gated_override(primary: PredictionSet, a1: PredictionSet, a2: PredictionSet,
                   pairs: PairSet) -> tuple[np.ndarray, OverrideLog]:
    """Final top-1 labels plus a record of every modified sample."""
    _check_aligned([primary, a1, a2])
    p_lab, a1_lab, a2_lab = primary.top1, a1.top1, a2.top1
    final = apply_override(p_lab, a1_lab, a2_lab, pairs)
    changed = np.flatnonzero(final != p_lab)
    records = [
        OverrideRecord(id=primary.ids[i], from_class=int(p_lab[i]), to_class=int(final[i]))
        for i in changed
    ]
    return final, OverrideLog(records=records, total=primary.n)


def discover_pairs(primary: PredictionSet, a1: PredictionSet, a2: PredictionSet,
                   y_true_val: np.ndarray) -> PairSet:
    """Exhaustive single-pair search on a validation split.

    For every ordered (src, dst) the override is applied alone and scored by
    the MacroF1 change against the primary baseline; pairs with a strictly
    positive change and at least one affected sample are kept, ordered by
    descending delta then class indices.
    """
    _check_aligned([primary, a1, a2])
    y_true = np.asarray(y_true_val, dtype=np.int64)
    if y_true.size == 0:
        raise ConfigError("validation set is empty")
    if y_true.shape[0] != primary.n:
        raise AlignmentError("ground truth and predictions have different lengths")
    C = primary.logits.shape[1]
    p_lab, a1_lab, a2_lab = primary.top1, a1.top1, a2.top1
    base = macro_f1(confusion(y_true, p_lab, C))
    gate = a1_lab == a2_lab

    kept: list[ConfusionPair] = []
    for src in range(C):
        src_mask = gate & (p_lab == src)
        for dst in range(C):
            if dst == src:
                continue
            hit = src_mask & (a1_lab == dst)
            support = int(hit.sum())
            if support == 0:
                continue
            trial = p_lab.copy()
            trial[hit] = dst
            delta = macro_f1(confusion(y_true, trial, C)) - base
            if delta > 0:
                kept.append(ConfusionPair(src, dst, delta=delta, support=support))
    kept.sort(key=lambda p: (-p.delta, p.src, p.dst))
    return PairSet(kept)


@dataclass
class EnsembleOutcome:
    final_labels: np.ndarray
    log: OverrideLog

    @property
    def override_rate(self) -> float:
        return self.log.rate


def head_diverse_pipeline(primary_mlp: PredictionSet, cosine_advisor: PredictionSet,
                          decoupled_advisor: PredictionSet,
                          pairs: PairSet) -> EnsembleOutcome:
    """Primary MLP conditionally overridden by the two auxiliary heads."""
    final, log = gated_override(primary_mlp, cosine_advisor, decoupled_advisor, pairs)
    return EnsembleOutcome(final_labels=final, log=log)


def jitter_views(features: np.ndarray, n_views: int, sigma: float,
                 seed: int) -> list[np.ndarray]:
    """Feature-space stand-in for image test-time augmentation.

    View 0 is the unmodified input; the rest add isotropic Gaussian jitter.
    Only meant for desk-scale experiments, not a claim about image TTA.
    """
    if n_views < 1:
        raise ConfigError("n_views must be >= 1")
    rng = np.random.default_rng(seed)
    views = [np.asarray(features, dtype=np.float64)]
    for _ in range(n_views - 1):
        views.append(views[0] + rng.standard_normal(views[0].shape) * sigma)
    return views


def write_logits_csv(pset: PredictionSet, registry: ClassRegistry,
                     path: Path | str) -> None:
    """CSV "id,<class names>" with full-precision (repr round-trip) floats."""
    if registry.C != pset.logits.shape[1]:
        raise ConfigError("registry size does not match logit width")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *registry.names])
        for i, sample_id in enumerate(pset.ids):
            writer.writerow([sample_id, *(repr(float(x)) for x in pset.logits[i])])


def read_logits_csv(path: Path | str, registry: ClassRegistry | None = None,
                    source: str = "") -> PredictionSet:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"empty logits file: {path}") from None
        if not header or header[0] != "id":
            raise DataFormatError("logits CSV must start with an 'id' column")
        names = tuple(header[1:])
        if registry is not None and names != registry.names:
            raise DataFormatError("logits CSV class columns do not match the registry")
        ids, rows = [], []
        for row in reader:
            if len(row) != len(names) + 1:
                raise DataFormatError(f"bad column count on row {len(ids) + 2}")
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    logits = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(names)))
    return PredictionSet(ids=ids, logits=logits, source=source or str(path))


def write_predictions_csv(ids: Sequence[str], preds: np.ndarray,
                          registry: ClassRegistry, path: Path | str,
                          y_true: np.ndarray | None = None) -> None:
    """CSV "id,pred[,true]" using class names."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "pred", "true"] if y_true is not None else ["id", "pred"])
        for i, sample_id in enumerate(ids):
            row = [sample_id, registry.names[int(preds[i])]]
            if y_true is not None:
                row.append(registry.names[int(y_true[i])])
            writer.writerow(row)


def read_predictions_csv(path: Path | str, registry: ClassRegistry,
                         ) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "pred"]:
            raise DataFormatError("predictions CSV must have header id,pred[,true]")
        has_true = len(header) > 2 and header[2] == "true"
        ids, preds, trues = [], [], []
        for row in reader:
            ids.append(row[0])
            preds.append(registry.index(row[1]))
            if has_true:
                trues.append(registry.index(row[2]))
    return ids, np.array(preds, dtype=np.int64), (
        np.array(trues, dtype=np.int64) if has_true else None)


def write_pairs_json(pairs: PairSet, registry: ClassRegistry, path: Path | str) -> None:
    payload = [
        {"from": registry.names[p.src], "to": registry.names[p.dst],
         "delta": p.delta, "support": p.support}
        for p in pairs
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_pairs_json(path: Path | str, registry: ClassRegistry) -> PairSet:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"pair file is not valid JSON: {exc}") from None
    pairs = [
        ConfusionPair(registry.index(item["from"]), registry.index(item["to"]),
                      delta=float(item.get("delta", 0.0)),
                      support=int(item.get("support", 0)))
        for item in payload
    ]
    return PairSet(pairs)


def write_override_log(log: OverrideLog, registry: ClassRegistry, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log.records:
            fh.write(json.dumps(rec.to_dict(registry), sort_keys=True) + "\n")
        fh.write(json.dumps({"modified": log.modified, "total": log.total,
                             "rate": log.rate}, sort_keys=True) + "\n")
