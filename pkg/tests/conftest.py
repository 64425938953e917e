import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wbclab.data import ClassRegistry, EmbeddingDataset
from wbclab.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_synth():
    """Tiny 13-class dataset for fast training tests."""
    config = SyntheticConfig(
        d=8,
        counts=tuple(max(12, int(round(160 * 0.62 ** k))) for k in range(13)),
        seed=7,
    )
    return generate_synthetic(config)


@pytest.fixture()
def two_class_dataset():
    """Separable 2-class dataset with train/val/test splits."""
    rng = np.random.default_rng(3)
    n_per = 60
    # classes differ in direction, not offset, so LayerNorm keeps them apart
    pattern = np.array([2.0, 2.0, -2.0, -2.0])
    features = np.concatenate([
        pattern + rng.normal(0.0, 0.3, (n_per, 4)),
        -pattern + rng.normal(0.0, 0.3, (n_per, 4)),
    ]).astype(np.float32)
    labels = np.array([0] * n_per + [1] * n_per, dtype=np.int64)
    split = np.array((["train"] * 40 + ["val"] * 10 + ["test"] * 10) * 2, dtype="U8")
    ids = [f"s{i:03d}" for i in range(2 * n_per)]
    return EmbeddingDataset(features=features, labels=labels, split=split, ids=ids,
                            registry=ClassRegistry(("A", "B")))
