"""Head models over precomputed embeddings: forward and exact reverse-mode math.

A model is trunk -> stem -> head. The trunk is an identity-initialized d x d
affine map standing in for a trainable backbone, the stem is LayerNorm plus
inverted dropout, and the head is one of three families: linear, cosine
(normalized dot product), or a two-layer GELU MLP. All math runs in float64;
gradients are analytic and checked against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, NumericFailure
from .numerics import gelu, gelu_grad, softmax  # noqa: F401  (softmax re-exported)

LAYERNORM_EPS = 1e-5


@dataclass
class StemParams:
    gamma: np.ndarray            # (d,)
    beta: np.ndarray             # (d,)
    dropout: float = 0.1


@dataclass
class TrunkParams:
    weight: np.ndarray           # (d, d), identity at init
    bias: np.ndarray             # (d,), zero at init
    trainable: bool = True


@dataclass
class LinearHead:
    weight: np.ndarray           # (C, d)
    bias: np.ndarray             # (C,)
    family: str = field(default="linear", init=False)


@dataclass
class CosineHead:
    weight: np.ndarray           # (C, d), rows are class prototypes
    scale: float = 1.0           # fixed multiplier on the cosine logits
    family: str = field(default="cosine", init=False)


@dataclass
class MlpHead:
    w1: np.ndarray               # (h, d)
    b1: np.ndarray               # (h,)
    w2: np.ndarray               # (C, h)
    b2: np.ndarray               # (C,)
    dropout: float = 0.1
    family: str = field(default="mlp", init=False)


Head = Union[LinearHead, CosineHead, MlpHead]


@dataclass
class HeadModel:
    stem: StemParams
    head: Head
    trunk: TrunkParams | None
    d: int
    C: int
    seed: int = 0

    @property
    def family(self) -> str:
        return self.head.family

    @property
    def hidden(self) -> int | None:
        return self.head.w1.shape[0] if isinstance(self.head, MlpHead) else None


def init_model(family: str, d: int, C: int = 13, hidden: int | None = None,
               seed: int = 0, stem_dropout: float = 0.1,
               hidden_dropout: float = 0.1, cosine_scale: float = 1.0,
               with_trunk: bool = True) -> HeadModel:
    """Build a freshly initialized model; trunk starts as the exact identity."""
    if not 0.0 <= stem_dropout < 1.0 or not 0.0 <= hidden_dropout < 1.0:
        raise ConfigError("dropout rates must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    stem = StemParams(gamma=np.ones(d), beta=np.zeros(d), dropout=stem_dropout)
    trunk = TrunkParams(weight=np.eye(d), bias=np.zeros(d)) if with_trunk else None
    scale_in = 1.0 / np.sqrt(d)
    if family == "linear":
        head: Head = LinearHead(weight=rng.normal(0.0, scale_in, (C, d)), bias=np.zeros(C))
    elif family == "cosine":
        if cosine_scale <= 0:
            raise ConfigError("cosine scale must be > 0")
        head = CosineHead(weight=rng.normal(0.0, scale_in, (C, d)), scale=cosine_scale)
    elif family == "mlp":
        h = hidden if hidden is not None else d
        head = MlpHead(
            w1=rng.normal(0.0, scale_in, (h, d)),
            b1=np.zeros(h),
            w2=rng.normal(0.0, 1.0 / np.sqrt(h), (C, h)),
            b2=np.zeros(C),
            dropout=hidden_dropout,
        )
    else:
        raise ConfigError(f"unknown head family: {family!r}")
    return HeadModel(stem=stem, head=head, trunk=trunk, d=d, C=C, seed=seed)


def parameters(model: HeadModel) -> dict[str, np.ndarray]:
    """Live references to every parameter array, keyed by dotted name."""
    params: dict[str, np.ndarray] = {}
    if model.trunk is not None:
        params["trunk.weight"] = model.trunk.weight
        params["trunk.bias"] = model.trunk.bias
    params["stem.gamma"] = model.stem.gamma
    params["stem.beta"] = model.stem.beta
    head = model.head
    if isinstance(head, LinearHead):
        params["head.weight"] = head.weight
        params["head.bias"] = head.bias
    elif isinstance(head, CosineHead):
        params["head.weight"] = head.weight
    else:
        params["head.w1"] = head.w1
        params["head.b1"] = head.b1
        params["head.w2"] = head.w2
        params["head.b2"] = head.b2
    return params


def trainable_names(model: HeadModel, freeze: frozenset[str] = frozenset()) -> list[str]:
    names = []
    for name in parameters(model):
        if name in freeze:
            continue
        if name.startswith("trunk.") and model.trunk is not None and not model.trunk.trainable:
            continue
        names.append(name)
    return names


def clone_model(model: HeadModel) -> HeadModel:
    stem = StemParams(model.stem.gamma.copy(), model.stem.beta.copy(), model.stem.dropout)
    trunk = None
    if model.trunk is not None:
        trunk = TrunkParams(model.trunk.weight.copy(), model.trunk.bias.copy(),
                            model.trunk.trainable)
    head = model.head
    if isinstance(head, LinearHead):
        new_head: Head = LinearHead(head.weight.copy(), head.bias.copy())
    elif isinstance(head, CosineHead):
        new_head = CosineHead(head.weight.copy(), head.scale)
    else:
        new_head = MlpHead(head.w1.copy(), head.b1.copy(), head.w2.copy(),
                           head.b2.copy(), head.dropout)
    return HeadModel(stem=stem, head=new_head, trunk=trunk, d=model.d, C=model.C,
                     seed=model.seed)


def layer_norm(f: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = LAYERNORM_EPS) -> np.ndarray:
    """Per-row LayerNorm with 1/d variance normalization."""
    f = np.asarray(f, dtype=np.float64)
    mu = f.mean(axis=-1, keepdims=True)
    var = np.square(f - mu).mean(axis=-1, keepdims=True)
    return gamma * (f - mu) / np.sqrt(var + eps) + beta


def dropout(z: np.ndarray, p_drop: float, rng: np.random.Generator | None,
            training: bool) -> np.ndarray:
    """Inverted dropout: scales survivors by 1/(1-p) so inference is identity."""
    if not 0.0 <= p_drop < 1.0:
        raise ConfigError("p_drop must lie in [0, 1)")
    if not training or p_drop == 0.0:
        return np.asarray(z, dtype=np.float64)
    if rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    mask = (rng.random(np.shape(z)) >= p_drop) / (1.0 - p_drop)
    return np.asarray(z, dtype=np.float64) * mask


def _dropout_mask(shape: tuple[int, ...], p: float,
                  rng: np.random.Generator | None, training: bool) -> np.ndarray | None:
    """None means identity (eval mode or p == 0)."""
    if not training or p == 0.0:
        return None
    if rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    return (rng.random(shape) >= p) / (1.0 - p)


def forward_batch(model: HeadModel, feats: np.ndarray, mode: str = "eval",
                  rng: np.random.Generator | None = None,
                  masks: dict[str, np.ndarray | None] | None = None,
                  ) -> tuple[np.ndarray, dict]:
    """Run trunk -> stem -> head over a batch; the cache enables backward.

    ``masks`` replays previously drawn dropout masks so a forward/backward
    pair (or a finite-difference probe) sees identical randomness.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode: {mode!r}")
    training = mode == "train"
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ConfigError(f"expected batch shape (n, {model.d}), got {x.shape}")
    cache: dict = {"x": x, "training": training}

    if model.trunk is not None:
        t = x @ model.trunk.weight.T + model.trunk.bias
    else:
        t = x
    cache["t"] = t

    mu = t.mean(axis=1, keepdims=True)
    centered = t - mu
    var = np.square(centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYERNORM_EPS)
    xhat = centered * inv_std
    ln_out = model.stem.gamma * xhat + model.stem.beta
    cache.update(xhat=xhat, inv_std=inv_std)

    if masks is not None:
        stem_mask = masks.get("stem")
    else:
        stem_mask = _dropout_mask(ln_out.shape, model.stem.dropout, rng, training)
    z = ln_out if stem_mask is None else ln_out * stem_mask
    cache.update(stem_mask=stem_mask, z=z)

    head = model.head
    if isinstance(head, LinearHead):
        logits = z @ head.weight.T + head.bias
    elif isinstance(head, CosineHead):
        z_norm = np.linalg.norm(z, axis=1, keepdims=True)
        w_norm = np.linalg.norm(head.weight, axis=1, keepdims=True)
        if np.any(w_norm == 0):
            raise NumericFailure("cosine head has a zero-norm prototype row",
                                 parameter="head.weight")
        zn = np.divide(z, z_norm, out=np.zeros_like(z), where=z_norm > 0)
        wn = head.weight / w_norm
        logits = head.scale * (zn @ wn.T)
        cache.update(zn=zn, z_norm=z_norm, wn=wn, w_norm=w_norm)
    else:
        pre = z @ head.w1.T + head.b1
        act = gelu(pre)
        if masks is not None:
            hidden_mask = masks.get("hidden")
        else:
            hidden_mask = _dropout_mask(act.shape, head.dropout, rng, training)
        h_drop = act if hidden_mask is None else act * hidden_mask
        logits = h_drop @ head.w2.T + head.b2
        cache.update(pre=pre, hidden_mask=hidden_mask, h_drop=h_drop)

    cache["masks"] = {"stem": stem_mask, "hidden": cache.get("hidden_mask")}
    return logits, cache


def backward_batch(model: HeadModel, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the scalar loss that produced ``dlogits``."""
    head = model.head
    z = cache["z"]
    dy = np.asarray(dlogits, dtype=np.float64)
    grads: dict[str, np.ndarray] = {}

    if isinstance(head, LinearHead):
        grads["head.weight"] = dy.T @ z
        grads["head.bias"] = dy.sum(axis=0)
        dz = dy @ head.weight
    elif isinstance(head, CosineHead):
        zn, z_norm, wn, w_norm = cache["zn"], cache["z_norm"], cache["wn"], cache["w_norm"]
        s = head.scale
        dzn = s * (dy @ wn)
        dwn = s * (dy.T @ zn)
        # project out the radial component, then undo the normalization
        dz_dir = dzn - np.sum(dzn * zn, axis=1, keepdims=True) * zn
        dz = np.divide(dz_dir, z_norm, out=np.zeros_like(dz_dir), where=z_norm > 0)
        dw_dir = dwn - np.sum(dwn * wn, axis=1, keepdims=True) * wn
        grads["head.weight"] = dw_dir / w_norm
    else:
        pre, hidden_mask, h_drop = cache["pre"], cache["hidden_mask"], cache["h_drop"]
        grads["head.w2"] = dy.T @ h_drop
        grads["head.b2"] = dy.sum(axis=0)
        dh = dy @ head.w2
        if hidden_mask is not None:
            dh = dh * hidden_mask
        dpre = dh * gelu_grad(pre)
        grads["head.w1"] = dpre.T @ z
        grads["head.b1"] = dpre.sum(axis=0)
        dz = dpre @ head.w1

    stem_mask = cache["stem_mask"]
    dln = dz if stem_mask is None else dz * stem_mask
    xhat, inv_std = cache["xhat"], cache["inv_std"]
    grads["stem.gamma"] = (dln * xhat).sum(axis=0)
    grads["stem.beta"] = dln.sum(axis=0)
    dxhat = dln * model.stem.gamma
    dt = inv_std * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
    )

    if model.trunk is not None:
        grads["trunk.weight"] = dt.T @ cache["x"]
        grads["trunk.bias"] = dt.sum(axis=0)
    return grads


def forward(model: HeadModel, f: np.ndarray, mode: str = "eval",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Logits for a single feature vector."""
    logits, _ = forward_batch(model, np.asarray(f, dtype=np.float64)[None, :],
                              mode=mode, rng=rng)
    return logits[0]


def backward(model: HeadModel, feats: np.ndarray, targets: np.ndarray,
             loss_config, rng: np.random.Generator | None = None,
             mode: str = "train",
             masks: dict[str, np.ndarray | None] | None = None,
             ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss plus gradients w.r.t. every trainable parameter for one batch."""
    from .objective import loss_and_dlogits

    logits, cache = forward_batch(model, feats, mode=mode, rng=rng, masks=masks)
    loss, dlogits = loss_and_dlogits(logits, targets, loss_config)
    grads = backward_batch(model, cache, dlogits)
    if not np.isfinite(loss):
        raise NumericFailure("loss is non-finite", parameter="loss")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericFailure(f"non-finite gradient for {name}", parameter=name)
    return float(loss), grads


def predict_logits(model: HeadModel, feats: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Eval-mode logits over any number of rows (pure, deterministic)."""
    feats = np.asarray(feats, dtype=np.float64)
    out = np.empty((feats.shape[0], model.C), dtype=np.float64)
    for start in range(0, feats.shape[0], batch_size):
        stop = min(start + batch_size, feats.shape[0])
        out[start:stop], _ = forward_batch(model, feats[start:stop], mode="eval")
    return out
