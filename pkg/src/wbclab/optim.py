"""AdamW with decoupled weight decay, two learning-rate groups, and warmup."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericFailure


@dataclass
class AdamWConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class OptimizerState:
    """First/second moment accumulators plus the shared step counter."""

    hyper: AdamWConfig
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    no_decay: frozenset[str] = frozenset()


def init_optimizer(params: dict[str, np.ndarray],
                   hyper: AdamWConfig | None = None) -> OptimizerState:
    """Fresh state; 1-D parameters (biases, LayerNorm affine) skip weight decay."""
    hyper = hyper or AdamWConfig()
    state = OptimizerState(hyper=hyper)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p, dtype=np.float64)
        state.v[name] = np.zeros_like(p, dtype=np.float64)
    state.no_decay = frozenset(n for n, p in params.items() if p.ndim < 2)
    return state


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               state: OptimizerState, lr_for: dict[str, float]) -> None:
    """One in-place update over every name present in ``grads``.

    ``lr_for`` maps parameter name -> learning rate (resolved per group by
    the caller). Decay is decoupled: p -= lr * wd * p, applied independently
    of the moment-based step and skipped for the no-decay set.
    """
    hp = state.hyper
    state.step += 1
    t = state.step
    bc1 = 1.0 - hp.beta1 ** t
    bc2 = 1.0 - hp.beta2 ** t
    for name, g in grads.items():
        if name not in params:
            raise ConfigError(f"gradient for unknown parameter {name!r}")
        if not np.isfinite(g).all():
            raise NumericFailure(f"non-finite gradient for {name}", parameter=name)
        lr = lr_for[name]
        p = params[name]
        m, v = state.m[name], state.v[name]
        m *= hp.beta1
        m += (1.0 - hp.beta1) * g
        v *= hp.beta2
        v += (1.0 - hp.beta2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        if hp.weight_decay != 0.0 and name not in state.no_decay:
            p -= lr * hp.weight_decay * p
        p -= lr * m_hat / (np.sqrt(v_hat) + hp.eps)


def warmup_factor(step: int, warmup_steps: int) -> float:
    """Linear ramp 0 -> 1 over ``warmup_steps`` optimizer steps, then flat."""
    if step < 0:
        raise ConfigError("step must be >= 0")
    if warmup_steps <= 0:
        return 1.0
    return min(1.0, step / warmup_steps)
