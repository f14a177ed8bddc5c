"""Layer sequencing with automatic shape adaptation.

The network consumes sequences shaped [batch, time, features]. Convolution
layers see each time step as [channels, n] (the flat feature axis is split
using the layer's channel count); recurrent and dense layers see flat
features again. The output keeps the time axis; the single-step prediction
is the last time step of the output.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv1dSpec, DenseSpec, LstmSpec, build_layer

__all__ = ["Network"]


class Network:
    """Ordered layer stack with train/eval modes."""

    def __init__(self, specs, rng: np.random.Generator | None = None):
        self.specs = list(specs)
        self.layers = [build_layer(s) for s in self.specs]
        self.mode = "eval"
        if rng is None:
            rng = np.random.default_rng(0)
        for layer in self.layers:
            layer.init_params(rng)
        self._shape_log = None

    def train(self) -> "Network":
        self.mode = "train"
        return self

    def eval(self) -> "Network":
        self.mode = "eval"
        return self

    def parameters(self):
        """Flat name -> array view of every parameter tensor."""
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.params.items():
                out[f"layer{i}.{key}"] = value
        return out

    def gradients(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.grads.items():
                out[f"layer{i}.{key}"] = value
        return out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def forward(self, x: np.ndarray, rng=None) -> np.ndarray:
        """Run the stack on [batch, time, features]; returns per-step output."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ValueError(f"expected [batch, time, features], got shape {x.shape}")
        train = self.mode == "train"
        shape_log = []
        cur = x
        for layer in self.layers:
            pre_shape = cur.shape
            if isinstance(layer.spec, Conv1dSpec) and cur.ndim == 3:
                c = layer.spec.in_channels
                if cur.shape[-1] % c != 0:
                    raise ValueError(
                        f"feature size {cur.shape[-1]} is not divisible by "
                        f"{c} input channels"
                    )
                cur = cur.reshape(cur.shape[0], cur.shape[1], c, cur.shape[-1] // c)
            elif isinstance(layer.spec, (LstmSpec, DenseSpec)) and cur.ndim == 4:
                cur = cur.reshape(cur.shape[0], cur.shape[1], -1)
            shape_log.append((pre_shape, cur.shape))
            cur = layer.forward(cur, train=train, rng=rng)
        self._shape_log = shape_log
        return cur

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward returning the last time step only."""
        mode = self.mode
        self.mode = "eval"
        try:
            out = self.forward(x)
        finally:
            self.mode = mode
        return out[:, -1]

    def backward(self, gy: np.ndarray) -> np.ndarray:
        """Backpropagate from the output gradient; returns the input gradient."""
        if self._shape_log is None:
            raise RuntimeError("backward called before forward")
        cur = gy
        for layer, (pre_shape, post_shape) in zip(
            reversed(self.layers), reversed(self._shape_log)
        ):
            cur = layer.backward(cur)
            if cur.shape != post_shape:
                raise RuntimeError(
                    f"gradient shape {cur.shape} does not match forward shape {post_shape}"
                )
            cur = cur.reshape(pre_shape)
        return cur
