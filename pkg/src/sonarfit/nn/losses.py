"""Classification losses and softmax utilities."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, exp, log, mean


def softmax_np(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax on a plain array."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: Tensor) -> Tensor:
    """Row-wise log-softmax, stabilized by a constant max shift."""
    shift = logits.data.max(axis=1, keepdims=True)
    z = logits - shift
    lse = log(exp(z).sum(axis=1, keepdims=True))
    return z - lse


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels out of range [0, {c})")
    logp = log_softmax(logits)
    picked = logp[(np.arange(n), labels.astype(np.intp))]
    return mean(-picked)
