"""Losses and target transforms for imbalance-aware head training.

Targets are per-sample probability rows (n, C): one-hot labels after optional
smoothing, possibly convexly mixed by feature-space MixUp. Class weights come
from inverse-sqrt counts (focal) or effective numbers (decoupled retraining);
both are normalized to mean 1 so the loss scale matches unweighted CE and the
configured learning rates keep their meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericFailure
from .numerics import log_softmax

LOSS_KINDS = ("focal", "weighted_ce")


@dataclass
class LossConfig:
    kind: str = "focal"
    gamma: float = 2.0
    smoothing: float = 0.1
    alpha: np.ndarray | None = None   # length-C class weights; None = resolve from counts
    mixup_prob: float = 0.1
    mixup_beta: float = 0.2
    effective_beta: float = 0.999     # used when kind == "weighted_ce" and alpha is None

    def validate(self, C: int | None = None) -> None:
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind: {self.kind!r}")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError("smoothing must lie in [0, 1)")
        if not 0.0 <= self.mixup_prob <= 1.0:
            raise ConfigError("mixup_prob must lie in [0, 1]")
        if self.mixup_beta <= 0:
            raise ConfigError("mixup_beta must be > 0")
        if self.alpha is not None:
            alpha = np.asarray(self.alpha, dtype=np.float64)
            if C is not None and alpha.shape != (C,):
                raise ConfigError(f"alpha must have shape ({C},)")
            if not np.isfinite(alpha).all() or (alpha <= 0).any():
                raise ConfigError("alpha weights must be finite and positive")


def _fill_zero_counts(raw: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Zero-count classes take the maximum weight among populated classes."""
    populated = counts > 0
    if not populated.any():
        raise ConfigError("all class counts are zero")
    out = raw.copy()
    out[~populated] = raw[populated].max()
    return out


def focal_alpha(counts: np.ndarray) -> np.ndarray:
    """Inverse-sqrt-count class weights, normalized to mean 1."""
    counts = np.asarray(counts, dtype=np.float64)
    with np.errstate(divide="ignore"):
        raw = np.where(counts > 0, 1.0 / np.sqrt(counts), 0.0)
    raw = _fill_zero_counts(raw, counts)
    return raw / raw.mean()


def effective_number_weights(counts: np.ndarray, beta: float = 0.999,
                             normalize: bool = True) -> np.ndarray:
    """Weights (1-beta)/(1-beta^n) per class, mean-1 normalized by default."""
    if not 0.0 <= beta < 1.0:
        raise ConfigError("beta must lie in [0, 1)")
    counts = np.asarray(counts, dtype=np.float64)
    if beta == 0.0:
        raw = np.ones_like(counts)
    else:
        with np.errstate(divide="ignore"):
            raw = np.where(counts > 0, (1.0 - beta) / (1.0 - beta ** counts), 0.0)
    raw = _fill_zero_counts(raw, counts)
    return raw / raw.mean() if normalize else raw


def smooth_targets(labels: np.ndarray | int, eps: float, C: int) -> np.ndarray:
    """(1-eps) one-hot + eps/C, rowwise; eps=0 reproduces exact one-hot."""
    if not 0.0 <= eps < 1.0:
        raise ConfigError("smoothing eps must lie in [0, 1)")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n = labels.shape[0]
    q = np.full((n, C), eps / C, dtype=np.float64)
    q[np.arange(n), labels] += 1.0 - eps
    return q


def _check_targets(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ConfigError(f"logits {logits.shape} and targets {targets.shape} differ")
    if not np.isfinite(logits).all():
        raise NumericFailure("non-finite logits", parameter="logits")
    return logits, targets


def focal_loss(logits: np.ndarray, targets: np.ndarray,
               alpha: np.ndarray | None = None, gamma: float = 2.0) -> float:
    """Batch-mean focal loss with soft targets and per-class alpha weights."""
    logits, q = _check_targets(logits, targets)
    logp = log_softmax(logits)
    p = np.exp(logp)
    a = np.ones(logits.shape[1]) if alpha is None else np.asarray(alpha, dtype=np.float64)
    mod = (1.0 - p) ** gamma if gamma != 0.0 else 1.0
    per_elem = np.where(q > 0, -a * mod * q * logp, 0.0)
    return float(per_elem.sum(axis=1).mean())


def weighted_cross_entropy(logits: np.ndarray, targets: np.ndarray,
                           weights: np.ndarray | None = None) -> float:
    """Batch-mean cross-entropy with per-class weights and soft targets."""
    logits, q = _check_targets(logits, targets)
    logp = log_softmax(logits)
    w = np.ones(logits.shape[1]) if weights is None else np.asarray(weights, dtype=np.float64)
    per_elem = np.where(q > 0, -w * q * logp, 0.0)
    return float(per_elem.sum(axis=1).mean())


def loss_and_dlogits(logits: np.ndarray, targets: np.ndarray,
                     cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Loss value plus the exact gradient w.r.t. logits (batch-mean reduction).

    For focal loss, with p = softmax(y) the chain rule gives
    dL/dy_j = gp_j - p_j * sum_k gp_k where
    gp_k = alpha_k q_k (gamma p_k (1-p_k)^(gamma-1) log p_k - (1-p_k)^gamma);
    gamma = 0 collapses gp to -alpha*q, the weighted-CE gradient.
    """
    logits, q = _check_targets(logits, targets)
    n, C = logits.shape
    alpha = np.ones(C) if cfg.alpha is None else np.asarray(cfg.alpha, dtype=np.float64)
    logp = log_softmax(logits)
    p = np.exp(logp)
    gamma = cfg.gamma if cfg.kind == "focal" else 0.0

    if gamma == 0.0:
        gp = -alpha * q
        loss = float(np.where(q > 0, -alpha * q * logp, 0.0).sum(axis=1).mean())
    else:
        one_minus = 1.0 - p
        with np.errstate(divide="ignore", invalid="ignore"):
            curv = np.where(one_minus > 0,
                            gamma * p * one_minus ** (gamma - 1.0) * logp, 0.0)
        gp = alpha * q * (curv - one_minus ** gamma)
        loss = float(np.where(q > 0, -alpha * one_minus ** gamma * q * logp, 0.0)
                     .sum(axis=1).mean())
    dlogits = (gp - p * gp.sum(axis=1, keepdims=True)) / n
    return loss, dlogits


@dataclass
class MixupResult:
    features: np.ndarray
    targets: np.ndarray
    applied: bool
    lam: float = 1.0
    warned: bool = False


def mixup_apply(features: np.ndarray, targets: np.ndarray, lam: float,
                perm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic convex mix of a batch with its permutation."""
    mixed_x = lam * features + (1.0 - lam) * features[perm]
    mixed_q = lam * targets + (1.0 - lam) * targets[perm]
    return mixed_x, mixed_q


def mixup(features: np.ndarray, targets: np.ndarray, prob: float,
          beta_param: float, rng: np.random.Generator) -> MixupResult:
    """Batch-level MixUp: with probability ``prob`` mix by lambda ~ Beta(b, b).

    prob == 0 consumes no randomness, so disabling MixUp leaves the rest of
    a run's rng stream untouched.
    """
    if prob <= 0.0:
        return MixupResult(features, targets, applied=False)
    if rng.random() >= prob:
        return MixupResult(features, targets, applied=False)
    if features.shape[0] < 2:
        return MixupResult(features, targets, applied=False, warned=True)
    lam = float(rng.beta(beta_param, beta_param))
    perm = rng.permutation(features.shape[0])
    mixed_x, mixed_q = mixup_apply(features, targets, lam, perm)
    return MixupResult(mixed_x, mixed_q, applied=True, lam=lam)
