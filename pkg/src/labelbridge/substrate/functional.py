"""Checked entry points for probability primitives on single vectors."""

import numpy as np

from labelbridge.substrate import tensor as T
from labelbridge.substrate.tensor import NonFiniteError, Tensor


def _check_logits(v):
    if v.size == 0 or v.shape[-1] == 0:
        raise ValueError("empty logit vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite logits")


def softmax(logits, axis=-1):
    """Softmax of a Tensor (taped) or array-like (plain ndarray result)."""
    if isinstance(logits, Tensor):
        _check_logits(logits.data)
        return T.softmax(logits, axis)
    v = np.asarray(logits, dtype=np.float64)
    _check_logits(v)
    return T._softmax_np(v, axis)


def cross_entropy(logits, target):
    """``-log softmax(logits)[target]`` for one logit vector, as a scalar Tensor."""
    logits = T.as_tensor(logits)
    _check_logits(logits.data)
    if logits.ndim != 1:
        raise ValueError("cross_entropy takes a single logit vector; use masked_cross_entropy for batches")
    if not 0 <= int(target) < logits.shape[0]:
        raise IndexError(f"target {target} out of range for {logits.shape[0]} classes")
    return T.masked_cross_entropy(logits, np.asarray(int(target)))
