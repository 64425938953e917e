"""Embedding datasets: class registry, binary feature files, manifests, sampling.

Feature files are a little-endian binary: magic ``EMB1``, u32 sample count,
u32 dimension, then n*d float32 values in row-major order. A JSON manifest
ties a feature file to newline-delimited label/split/id files and the class
registry, keeping everything except the floats human-readable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ConfigError, DataFormatError

FEATURE_MAGIC = b"EMB1"
SPLITS = ("train", "val", "test")

# 13 white blood cell classes, head-to-tail by training frequency.
WBC_CLASSES = (
    "SNE", "LY", "MO", "EO", "BA", "VLY", "BNE",
    "MMY", "MY", "PMY", "BL", "PC", "PLY",
)


@dataclass(frozen=True)
class ClassRegistry:
    """Ordered, unique class names; index in ``names`` is the integer label."""

    names: tuple[str, ...] = WBC_CLASSES

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ConfigError("class names must be unique")
        if not self.names:
            raise ConfigError("class registry may not be empty")

    @property
    def C(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown class name: {name!r}") from None


DEFAULT_REGISTRY = ClassRegistry()


@dataclass
class EmbeddingDataset:
    """Immutable-by-convention container for precomputed cell embeddings."""

    features: np.ndarray          # (n, d) float32
    labels: np.ndarray            # (n,) int64 in [0, C)
    split: np.ndarray             # (n,) unicode, entries in SPLITS
    ids: list[str]                # length n, unique
    registry: ClassRegistry = field(default_factory=lambda: DEFAULT_REGISTRY)

    def __post_init__(self):
        n = self.features.shape[0]
        if not (len(self.labels) == len(self.split) == len(self.ids) == n):
            raise AlignmentError("features, labels, splits, and ids must have equal length")
        if n and not np.isfinite(self.features).all():
            raise DataFormatError("features contain non-finite values")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.registry.C):
            raise DataFormatError("label outside [0, C)")
        if len(set(self.ids)) != n:
            raise DataFormatError("duplicate sample id")
        bad = set(np.unique(self.split)) - set(SPLITS)
        if bad:
            raise DataFormatError(f"unknown split tags: {sorted(bad)}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def indices(self, split_tag: str) -> np.ndarray:
        if split_tag not in SPLITS:
            raise ConfigError(f"unknown split tag: {split_tag!r}")
        return np.flatnonzero(self.split == split_tag)

    def subset_arrays(self, split_tag: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
        idx = self.indices(split_tag)
        return (
            self.features[idx],
            self.labels[idx],
            [self.ids[i] for i in idx],
        )


def write_features(path: Path | str, features: np.ndarray) -> None:
    feats = np.ascontiguousarray(features, dtype="<f4")
    if feats.ndim != 2:
        raise DataFormatError("feature array must be 2-dimensional")
    n, d = feats.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(feats.tobytes(order="C"))


def read_features(path: Path | str, expect_dim: int | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise DataFormatError(f"bad feature-file magic: {magic!r}")
        header = fh.read(8)
        if len(header) != 8:
            raise DataFormatError("truncated feature-file header")
        n, d = struct.unpack("<II", header)
        if expect_dim is not None and d != expect_dim:
            raise DataFormatError(f"manifest dim {expect_dim} != file dim {d}")
        payload = fh.read()
    expected = n * d * 4
    if len(payload) != expected:
        raise DataFormatError(
            f"feature payload is {len(payload)} bytes, expected {expected} for {n}x{d} float32"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.reshape(n, d).copy()


def _read_lines(path: Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if text == "":
        return []
    return text.rstrip("\n").split("\n")


def load_dataset(manifest_path: Path | str) -> EmbeddingDataset:
    """Load a dataset from its JSON manifest; values are bit-exact to disk."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"manifest is not valid JSON: {exc}") from None

    for key in ("classes", "dim", "features", "labels", "splits", "ids"):
        if key not in manifest:
            raise DataFormatError(f"manifest missing key {key!r}")

    base = manifest_path.parent
    registry = ClassRegistry(tuple(manifest["classes"]))
    features = read_features(base / manifest["features"], expect_dim=int(manifest["dim"]))

    labels_lines = _read_lines(base / manifest["labels"])
    splits_lines = _read_lines(base / manifest["splits"])
    ids_lines = _read_lines(base / manifest["ids"])
    try:
        labels = np.array([int(x) for x in labels_lines], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"non-integer label: {exc}") from None
    split = np.array(splits_lines, dtype="U8")
    if features.shape[0] != len(labels):
        raise DataFormatError(
            f"feature file has {features.shape[0]} rows but label file has {len(labels)}"
        )
    return EmbeddingDataset(
        features=features,
        labels=labels,
        split=split,
        ids=list(ids_lines),
        registry=registry,
    )


def save_dataset(dataset: EmbeddingDataset, out_dir: Path | str,
                 manifest_name: str = "manifest.json") -> Path:
    """Write the five dataset files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_features(out / "features.bin", dataset.features)
    (out / "labels.txt").write_text(
        "".join(f"{int(x)}\n" for x in dataset.labels), encoding="utf-8")
    (out / "splits.txt").write_text(
        "".join(f"{s}\n" for s in dataset.split), encoding="utf-8")
    (out / "ids.txt").write_text(
        "".join(f"{i}\n" for i in dataset.ids), encoding="utf-8")
    manifest = {
        "classes": list(dataset.registry.names),
        "dim": dataset.d,
        "features": "features.bin",
        "labels": "labels.txt",
        "splits": "splits.txt",
        "ids": "ids.txt",
    }
    path = out / manifest_name
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def class_counts(dataset: EmbeddingDataset, split_tag: str) -> np.ndarray:
    """Per-class sample counts over one split; length C, sums to split size."""
    idx = dataset.indices(split_tag)
    return np.bincount(dataset.labels[idx], minlength=dataset.registry.C).astype(np.int64)


def balanced_sampler(labels: np.ndarray, epoch_len: int,
                     seed: int | np.random.SeedSequence) -> np.ndarray:
    """Class-uniform sampling with replacement.

    Each draw picks a class uniformly among classes present, then a sample
    uniformly within that class. Deterministic for a fixed seed.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigError("cannot sample from an empty label set")
    if epoch_len < 1:
        raise ConfigError("epoch_len must be >= 1")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    per_class = [np.flatnonzero(labels == c) for c in classes]
    class_draws = rng.integers(0, len(classes), size=epoch_len)
    out = np.empty(epoch_len, dtype=np.int64)
    for i, c in enumerate(class_draws):
        members = per_class[c]
        out[i] = members[rng.integers(0, len(members))]
    return out
