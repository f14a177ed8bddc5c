"""Gradient verification against central finite differences."""

from __future__ import annotations

import numpy as np

from .loss import loss_nmse
from .network import Network

__all__ = ["grad_check"]

# Relative-error floor: keeps finite-difference noise on near-zero gradient
# components from registering as disagreement.
_DENOM_FLOOR = 1e-4


def grad_check(network: Network, x: np.ndarray, target: np.ndarray, delta_fd: float = 1e-6) -> float:
    """Max relative disagreement between backprop and finite differences.

    The loss is ``loss_nmse`` on the last-time-step prediction. The network
    is evaluated in eval mode (dropout off) so the forward pass is
    deterministic. Returns 0 for networks without parameters.
    """
    mode = network.mode
    network.eval()
    try:
        return _grad_check(network, np.asarray(x, dtype=np.float64), np.asarray(target, dtype=np.float64), delta_fd)
    finally:
        network.mode = mode


def _loss_of(network, x, target):
    out = network.forward(x)
    value, _ = loss_nmse(out[:, -1], target)
    return value


def _grad_check(network, x, target, delta_fd):
    params = network.parameters()
    if not params:
        return 0.0

    out = network.forward(x)
    _, gpred = loss_nmse(out[:, -1], target)
    gy = np.zeros_like(out)
    gy[:, -1] = gpred
    network.zero_grads()
    network.backward(gy)
    analytic = {k: v.copy() for k, v in network.gradients().items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        gflat = analytic[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + delta_fd
            lp = _loss_of(network, x, target)
            flat[j] = orig - delta_fd
            lm = _loss_of(network, x, target)
            flat[j] = orig
            fd = (lp - lm) / (2.0 * delta_fd)
            err = abs(gflat[j] - fd) / max(abs(gflat[j]), abs(fd), _DENOM_FLOOR)
            if err > worst:
                worst = err
    return worst
