"""Shared numeric kernels: stable softmax and the exact (erf) GELU."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction.

    Subtracting the row max keeps exp() in range and makes the result
    exactly invariant to adding a constant to all logits whenever the
    additions themselves are exact in floating point.
    """
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def gelu(x: np.ndarray) -> np.ndarray:
    """Gaussian-error-function GELU (exact form, not the tanh approximation)."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx gelu(x) = Phi(x) + x * phi(x) with the standard normal cdf/pdf."""
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf
