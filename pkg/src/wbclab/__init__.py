"""wbclab: classifier-head workbench for white blood cell embeddings."""

__version__ = "0.1.0"

from .data import ClassRegistry, EmbeddingDataset, DEFAULT_REGISTRY, WBC_CLASSES  # noqa: F401
