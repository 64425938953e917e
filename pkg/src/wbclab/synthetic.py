"""Synthetic embedding generator with a maturation-continuum geometry.

Class means sit on a sphere far apart from each other, except the neutrophil
maturation chain (PMY -> MY -> MMY -> BNE -> SNE) whose consecutive means are
only ``chain_step`` apart, so a trained head confuses adjacent stages the way
real morphology does. Counts follow a configurable long-tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DEFAULT_REGISTRY, ClassRegistry, EmbeddingDataset
from .errors import ConfigError

MATURATION_CHAIN = ("PMY", "MY", "MMY", "BNE", "SNE")

# Mean placement radius, in units of the cluster noise scale. Non-chain
# classes land ~radius*sqrt(2) apart, far beyond the chain step.
_RADIUS_IN_SIGMA = 8.0


def long_tail_counts(largest: int = 8192, ratio: float = 0.62,
                     floor: int = 16, C: int = 13) -> tuple[int, ...]:
    """Geometric class counts: largest * ratio**k, clipped below at ``floor``."""
    return tuple(max(floor, int(round(largest * ratio ** k))) for k in range(C))


@dataclass
class SyntheticConfig:
    d: int = 32
    counts: tuple[int, ...] = field(default_factory=long_tail_counts)
    chain: tuple[str, ...] = MATURATION_CHAIN
    chain_step: float = 1.5      # mean separation of consecutive chain classes
    noise: float = 1.0           # isotropic within-class noise
    seed: int = 0
    registry: ClassRegistry = field(default_factory=lambda: DEFAULT_REGISTRY)

    def validate(self) -> None:
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if len(self.counts) != self.registry.C:
            raise ConfigError("counts must have one entry per registry class")
        if any(c < 1 for c in self.counts):
            raise ConfigError("every class present needs count >= 1")
        if self.chain_step <= 0 or self.noise < 0:
            raise ConfigError("chain_step must be > 0 and noise >= 0")
        for name in self.chain:
            self.registry.index(name)


def class_means(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    """Place per-class means; consecutive chain classes exactly chain_step apart."""
    C, d = config.registry.C, config.d
    radius = _RADIUS_IN_SIGMA * max(config.noise, config.chain_step)
    means = rng.standard_normal((C, d))
    means *= radius / np.linalg.norm(means, axis=1, keepdims=True)
    chain_idx = [config.registry.index(name) for name in config.chain]
    for prev, cur in zip(chain_idx, chain_idx[1:]):
        step = rng.standard_normal(d)
        step *= config.chain_step / np.linalg.norm(step)
        means[cur] = means[prev] + step
    return means


def generate_synthetic(config: SyntheticConfig) -> EmbeddingDataset:
    """Deterministic synthetic dataset with stratified 60/10/30 splits."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    means = class_means(config, rng)

    feats, labels, split_tags, ids = [], [], [], []
    for c, n_c in enumerate(config.counts):
        noise = rng.standard_normal((n_c, config.d)) * config.noise
        feats.append(means[c] + noise)
        labels.append(np.full(n_c, c, dtype=np.int64))
        n_train = int(0.6 * n_c)
        n_val = int(0.1 * n_c)
        tags = np.array(
            ["train"] * n_train + ["val"] * n_val + ["test"] * (n_c - n_train - n_val),
            dtype="U8",
        )
        rng.shuffle(tags)
        split_tags.append(tags)
        name = config.registry.names[c]
        ids.extend(f"{name}-{i:05d}" for i in range(n_c))

    features = np.concatenate(feats).astype(np.float32) if feats else np.zeros((0, config.d), np.float32)
    return EmbeddingDataset(
        features=features,
        labels=np.concatenate(labels) if labels else np.zeros(0, np.int64),
        split=np.concatenate(split_tags) if split_tags else np.array([], dtype="U8"),
        ids=ids,
        registry=config.registry,
    )
