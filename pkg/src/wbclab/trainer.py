"""Staged training loops: warmup schedules, checkpoint chaining, decoupled retraining.

Every run is a pure function of (initial model, dataset, config, seed): one
rng stream drives shuffling, MixUp, and dropout in a fixed order, so repeat
invocations produce bit-identical logs and weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import EmbeddingDataset, balanced_sampler, class_counts
from .errors import ConfigError
from .metrics import DEFAULT_TAIL_CLASSES, confusion, macro_f1, tail_composite, tail_macro_f1
from .model import HeadModel, backward, clone_model, parameters, predict_logits, trainable_names
from .objective import LossConfig, effective_number_weights, focal_alpha, mixup, smooth_targets
from .optim import AdamWConfig, adamw_step, init_optimizer, warmup_factor

SAMPLERS = ("sequential_shuffled", "balanced")

# Stage schedule defaults: epochs and (head, trunk) learning rates per stage,
# with warmup only in the first stage.
STAGE_DEFAULTS = (
    ("S1", 11, 2.5e-5, 5.0e-6, 2),
    ("S2", 5, 1.0e-5, 2.0e-6, 0),
    ("S3", 5, 5.0e-6, 1.0e-6, 0),
)

FREEZE_BACKBONE = frozenset({"trunk.weight", "trunk.bias", "stem.gamma", "stem.beta"})


@dataclass
class StageConfig:
    name: str = "S1"
    epochs: int = 11
    lr_head: float = 2.5e-5
    lr_trunk: float = 5.0e-6
    warmup_epochs: int = 0
    batch_size: int = 128
    grad_accum_steps: int = 1
    loss: LossConfig = field(default_factory=LossConfig)
    sampler: str = "sequential_shuffled"
    freeze: frozenset[str] = frozenset()

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr_head < 0 or self.lr_trunk < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.warmup_epochs > self.epochs:
            raise ConfigError("warmup_epochs must be <= epochs")
        if self.batch_size < 1 or self.grad_accum_steps < 1:
            raise ConfigError("batch_size and grad_accum_steps must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler: {self.sampler!r}")


def default_stages(lr_scale: float = 1.0, batch_size: int = 128,
                   loss: LossConfig | None = None,
                   freeze: frozenset[str] = frozenset()) -> list[StageConfig]:
    """The 11/5/5 three-stage schedule; ``lr_scale`` adapts it to desk scale."""
    loss = loss if loss is not None else LossConfig()
    return [
        StageConfig(
            name=name, epochs=epochs, lr_head=lr_h * lr_scale,
            lr_trunk=lr_t * lr_scale, warmup_epochs=warmup,
            batch_size=batch_size, loss=loss, freeze=freeze,
        )
        for name, epochs, lr_h, lr_t, warmup in STAGE_DEFAULTS
    ]


def lr_at(stage: StageConfig, step: int, steps_per_epoch: int) -> tuple[float, float]:
    """(lr_head, lr_trunk) at an optimizer step: linear warmup, then constant."""
    factor = warmup_factor(step, stage.warmup_epochs * steps_per_epoch)
    return stage.lr_head * factor, stage.lr_trunk * factor


@dataclass
class EpochRecord:
    stage: str
    epoch: int
    train_loss: float
    val_macro_f1: float
    val_tail_macro_f1: float
    val_tail_composite: float
    lr_head: float
    lr_trunk: float

    def to_dict(self) -> dict:
        return {
            "stage": self.stage, "epoch": self.epoch, "train_loss": self.train_loss,
            "val_macro_f1": self.val_macro_f1,
            "val_tail_macro_f1": self.val_tail_macro_f1,
            "val_tail_composite": self.val_tail_composite,
            "lr_head": self.lr_head, "lr_trunk": self.lr_trunk,
        }


@dataclass
class StageResult:
    best_model: HeadModel
    best_epoch: int
    history: list[EpochRecord]


def resolve_loss(cfg: LossConfig, counts: np.ndarray) -> LossConfig:
    """Fill in alpha from train counts when the config leaves it open."""
    cfg.validate(C=len(counts))
    if cfg.alpha is not None:
        return cfg
    if cfg.kind == "focal":
        alpha = focal_alpha(counts)
    else:
        alpha = effective_number_weights(counts, cfg.effective_beta)
    return replace(cfg, alpha=alpha)


def _tail_idx_for(dataset: EmbeddingDataset) -> list[int]:
    names = [n for n in DEFAULT_TAIL_CLASSES if n in dataset.registry.names]
    if not names:
        return list(range(dataset.registry.C))
    return [dataset.registry.index(n) for n in names]


def evaluate_split(model: HeadModel, dataset: EmbeddingDataset, split_tag: str,
                   ) -> tuple[float, float, float]:
    """(macro_f1, tail_macro_f1, tail_composite) on one split, eval mode."""
    feats, labels, _ = dataset.subset_arrays(split_tag)
    logits = predict_logits(model, feats.astype(np.float64))
    preds = np.argmax(logits, axis=1)
    cm = confusion(labels, preds, dataset.registry.C)
    macro = macro_f1(cm)
    tail = tail_macro_f1(cm, _tail_idx_for(dataset))
    return macro, tail, tail_composite(macro, tail)


def train_stage(model: HeadModel, dataset: EmbeddingDataset, stage: StageConfig,
                seed: int | np.random.SeedSequence,
                adamw: AdamWConfig | None = None) -> StageResult:
    """One stage of mini-batch AdamW; returns the best-by-val-MacroF1 checkpoint."""
    stage.validate()
    if model.d != dataset.d:
        raise ConfigError(f"model d={model.d} but dataset d={dataset.d}")
    train_idx = dataset.indices("train")
    if train_idx.size == 0 or dataset.indices("val").size == 0:
        raise ConfigError("train and val splits must be non-empty")

    counts = class_counts(dataset, "train")
    loss_cfg = resolve_loss(stage.loss, counts)
    rng = np.random.default_rng(seed)

    work = clone_model(model)
    params = parameters(work)
    trainable = trainable_names(work, stage.freeze)
    if not trainable:
        raise ConfigError("freeze mask leaves no trainable parameters")
    opt = init_optimizer({n: params[n] for n in trainable}, adamw)

    x_train = dataset.features[train_idx].astype(np.float64)
    y_train = dataset.labels[train_idx]
    epoch_len = train_idx.size
    n_batches = math.ceil(epoch_len / stage.batch_size)
    steps_per_epoch = math.ceil(n_batches / stage.grad_accum_steps)

    best_macro = -1.0
    best_epoch = -1
    best_params: dict[str, np.ndarray] = {}
    history: list[EpochRecord] = []
    opt_step = 0
    C = dataset.registry.C

    for epoch in range(stage.epochs):
        if stage.sampler == "sequential_shuffled":
            order = rng.permutation(epoch_len)
        else:
            order = balanced_sampler(y_train, epoch_len, int(rng.integers(2 ** 63)))

        loss_sum = 0.0
        micro: list[tuple[dict[str, np.ndarray], int]] = []
        last_lrs = lr_at(stage, opt_step, steps_per_epoch)

        def flush() -> None:
            nonlocal opt_step, last_lrs
            total = sum(n for _, n in micro)
            merged = {
                name: sum(g[name] * (n / total) for g, n in micro)
                for name in trainable
            }
            lr_h, lr_t = lr_at(stage, opt_step, steps_per_epoch)
            lr_for = {n: lr_t if n.startswith("trunk.") else lr_h for n in trainable}
            adamw_step({n: params[n] for n in trainable}, merged, opt, lr_for)
            last_lrs = (lr_h, lr_t)
            opt_step += 1
            micro.clear()

        for b in range(n_batches):
            batch = order[b * stage.batch_size:(b + 1) * stage.batch_size]
            xb = x_train[batch]
            qb = smooth_targets(y_train[batch], loss_cfg.smoothing, C)
            if loss_cfg.mixup_prob > 0:
                mixed = mixup(xb, qb, loss_cfg.mixup_prob, loss_cfg.mixup_beta, rng)
                xb, qb = mixed.features, mixed.targets
            loss, grads = backward(work, xb, qb, loss_cfg, rng=rng, mode="train")
            loss_sum += loss * len(batch)
            micro.append(({n: grads[n] for n in trainable}, len(batch)))
            if len(micro) == stage.grad_accum_steps or b == n_batches - 1:
                flush()

        macro, tail, composite = evaluate_split(work, dataset, "val")
        history.append(EpochRecord(
            stage=stage.name, epoch=epoch, train_loss=loss_sum / epoch_len,
            val_macro_f1=macro, val_tail_macro_f1=tail, val_tail_composite=composite,
            lr_head=last_lrs[0], lr_trunk=last_lrs[1],
        ))
        if macro > best_macro:
            best_macro = macro
            best_epoch = epoch
            best_params = {n: p.copy() for n, p in params.items()}

    best_model = clone_model(work)
    best = parameters(best_model)
    for name, value in best_params.items():
        best[name][...] = value
    return StageResult(best_model=best_model, best_epoch=best_epoch, history=history)


def run_multistage(model_init: HeadModel, dataset: EmbeddingDataset,
                   stages: list[StageConfig], seed: int,
                   adamw: AdamWConfig | None = None) -> list[StageResult]:
    """Chain stages: each starts from the previous best with fresh optimizer state."""
    if not stages:
        raise ConfigError("need at least one stage")
    children = np.random.SeedSequence(seed).spawn(len(stages))
    results: list[StageResult] = []
    current = model_init
    for stage, child in zip(stages, children):
        result = train_stage(current, dataset, stage, child, adamw)
        results.append(result)
        current = result.best_model
    return results


def decoupled_retrain(s3_model: HeadModel, dataset: EmbeddingDataset,
                      epochs: int = 8, lr_head: float = 1.0e-5,
                      batch_size: int = 128, seed: int = 0,
                      effective_beta: float = 0.999,
                      freeze: frozenset[str] = FREEZE_BACKBONE,
                      adamw: AdamWConfig | None = None) -> StageResult:
    """Frozen-representation head retraining with effective-number CE weights
    and a balanced sampler; the input checkpoint must be an MLP-family model."""
    if s3_model.family != "mlp":
        raise ConfigError(f"decoupled retraining expects an mlp head, got {s3_model.family!r}")
    loss = LossConfig(kind="weighted_ce", smoothing=0.0, mixup_prob=0.0,
                      effective_beta=effective_beta)
    stage = StageConfig(
        name="decoupled", epochs=epochs, lr_head=lr_head, lr_trunk=0.0,
        warmup_epochs=0, batch_size=batch_size, loss=loss,
        sampler="balanced", freeze=freeze,
    )
    return train_stage(s3_model, dataset, stage, seed, adamw)


def write_training_log(records: list[EpochRecord], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
