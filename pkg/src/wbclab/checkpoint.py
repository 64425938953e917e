"""Binary model checkpoints: magic ``HFCK``, versioned JSON header, float64 params.

Layout: 4 magic bytes, u32 format version, u32 header length, UTF-8 JSON
header (dims, family, config, stage tag, seed, parameter order), then each
parameter as float64 little-endian in the header-declared order. Round-trips
are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import (CosineHead, HeadModel, LinearHead, MlpHead, StemParams,
                    TrunkParams, parameters)

CHECKPOINT_MAGIC = b"HFCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: HeadModel, path: Path | str, stage: str = "") -> None:
    params = parameters(model)
    head = model.head
    header = {
        "family": model.family,
        "d": model.d,
        "C": model.C,
        "hidden": model.hidden,
        "stem_dropout": model.stem.dropout,
        "hidden_dropout": head.dropout if isinstance(head, MlpHead) else None,
        "cosine_scale": head.scale if isinstance(head, CosineHead) else None,
        "trunk": model.trunk is not None,
        "trunk_trainable": model.trunk.trainable if model.trunk is not None else None,
        "stage": stage,
        "seed": model.seed,
        "params": [[name, list(p.shape)] for name, p in params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for _, p in params.items():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes(order="C"))


def load_checkpoint(path: Path | str) -> tuple[HeadModel, str]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(f"bad checkpoint magic: {magic!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataFormatError(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise DataFormatError(f"truncated parameter payload for {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    d, C = header["d"], header["C"]
    stem = StemParams(gamma=arrays["stem.gamma"], beta=arrays["stem.beta"],
                      dropout=header["stem_dropout"])
    trunk = None
    if header["trunk"]:
        trunk = TrunkParams(weight=arrays["trunk.weight"], bias=arrays["trunk.bias"],
                            trainable=header["trunk_trainable"])
    family = header["family"]
    if family == "linear":
        head = LinearHead(weight=arrays["head.weight"], bias=arrays["head.bias"])
    elif family == "cosine":
        head = CosineHead(weight=arrays["head.weight"], scale=header["cosine_scale"])
    elif family == "mlp":
        head = MlpHead(w1=arrays["head.w1"], b1=arrays["head.b1"],
                       w2=arrays["head.w2"], b2=arrays["head.b2"],
                       dropout=header["hidden_dropout"])
    else:
        raise DataFormatError(f"unknown family in checkpoint: {family!r}")
    model = HeadModel(stem=stem, head=head, trunk=trunk, d=d, C=C,
                      seed=header["seed"])
    return model, header["stage"]
