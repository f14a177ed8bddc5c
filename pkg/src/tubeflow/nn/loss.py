"""Normalized mean square error with a guarded denominator."""

from __future__ import annotations

import numpy as np

__all__ = ["loss_nmse"]


def loss_nmse(prediction: np.ndarray, target: np.ndarray, delta: float = 1e-6):
    """L = mean((pred - target)^2 / max(target^2, delta)).

    Returns ``(value, gradient)`` where the gradient is taken with respect
    to the prediction. ``delta`` keeps near-zero targets from blowing up
    the denominator.
    """
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch: {prediction.shape} vs {target.shape}")
    m = prediction.size
    if m == 0:
        raise ValueError("empty tensors")
    denom = np.maximum(target * target, delta)
    diff = prediction - target
    value = float(np.sum(diff * diff / denom) / m)
    grad = (2.0 / m) * diff / denom
    return value, grad
