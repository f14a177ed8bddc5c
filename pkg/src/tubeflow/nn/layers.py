"""From-scratch layers with manual forward/backward passes.

Everything runs in 64-bit floats. Layers operate on batched arrays whose
trailing axes carry the canonical shape:

* Conv1d      [..., channels, n]      -> [..., out_channels, n]
* Dense       [..., in_features]      -> [..., out_features]
* Lstm        [batch, time, features] -> [batch, time, hidden]
* LeakyRelu / Dropout: elementwise on any shape.

``backward`` accumulates parameter gradients on the layer and returns the
gradient with respect to the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Conv1dSpec",
    "LstmSpec",
    "DenseSpec",
    "LeakyReluSpec",
    "DropoutSpec",
    "spec_from_dict",
    "build_layer",
    "Conv1dLayer",
    "LstmLayer",
    "DenseLayer",
    "LeakyReluLayer",
    "DropoutLayer",
]


@dataclass(frozen=True)
class Conv1dSpec:
    in_channels: int
    out_channels: int
    kernel_size: int = 3

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")

    def to_dict(self):
        return {
            "type": "conv1d",
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
        }


@dataclass(frozen=True)
class LstmSpec:
    input_size: int
    hidden_size: int

    def to_dict(self):
        return {"type": "lstm", "input_size": self.input_size, "hidden_size": self.hidden_size}


@dataclass(frozen=True)
class DenseSpec:
    in_features: int
    out_features: int

    def to_dict(self):
        return {"type": "dense", "in_features": self.in_features, "out_features": self.out_features}


@dataclass(frozen=True)
class LeakyReluSpec:
    alpha: float = 0.01

    def to_dict(self):
        return {"type": "leaky_relu", "alpha": self.alpha}


@dataclass(frozen=True)
class DropoutSpec:
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate}")

    def to_dict(self):
        return {"type": "dropout", "rate": self.rate}


_SPEC_TYPES = {
    "conv1d": Conv1dSpec,
    "lstm": LstmSpec,
    "dense": DenseSpec,
    "leaky_relu": LeakyReluSpec,
    "dropout": DropoutSpec,
}


def spec_from_dict(d: dict):
    kind = d.get("type")
    if kind not in _SPEC_TYPES:
        raise ValueError(f"unknown layer type {kind!r}")
    kwargs = {k: v for k, v in d.items() if k != "type"}
    return _SPEC_TYPES[kind](**kwargs)


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-|z|) never overflows; the two branches share it.
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


class Layer:
    """Common bookkeeping: parameter and gradient dicts."""

    def __init__(self, spec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def zero_grads(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv1dLayer(Layer):
    """Same-padded 1D convolution (zero padding of (kernel-1)/2 per side)."""

    def init_params(self, rng):
        s = self.spec
        fan_in = s.in_channels * s.kernel_size
        fan_out = s.out_channels * s.kernel_size
        self.params = {
            "weight": _glorot_uniform(rng, (s.out_channels, s.in_channels, s.kernel_size), fan_in, fan_out),
            "bias": np.zeros(s.out_channels),
        }
        self.zero_grads()

    def _windows(self, x: np.ndarray) -> np.ndarray:
        """Stacked kernel windows as [..., n, in_channels*kernel] (BLAS-friendly)."""
        k = self.spec.kernel_size
        pad = (k - 1) // 2
        n = x.shape[-1]
        xp = np.zeros(x.shape[:-1] + (n + 2 * pad,))
        xp[..., pad : pad + n] = x
        # [..., n, C, K] without the generic pad/stride machinery (hot path).
        win = np.empty(x.shape[:-2] + (n, self.spec.in_channels, k))
        for j in range(k):
            win[..., j] = np.moveaxis(xp[..., j : j + n], -1, -2)
        return win.reshape(win.shape[:-2] + (self.spec.in_channels * k,))

    def forward(self, x, train=False, rng=None):
        if x.shape[-2] != self.spec.in_channels:
            raise ValueError(
                f"expected {self.spec.in_channels} input channels, got {x.shape[-2]}"
            )
        s = self.spec
        xw = self._windows(x)  # [..., n, C*K]
        w_mat = self.params["weight"].reshape(s.out_channels, s.in_channels * s.kernel_size)
        y = np.moveaxis(xw @ w_mat.T, -1, -2)  # [..., O, n]
        y += self.params["bias"].reshape((-1, 1))
        self._cache = xw
        return y

    def backward(self, gy):
        xw = self._cache
        s = self.spec
        k = s.kernel_size
        pad = (k - 1) // 2
        n = gy.shape[-1]
        w_mat = self.params["weight"].reshape(s.out_channels, s.in_channels * k)

        gyt = np.moveaxis(gy, -2, -1)  # [..., n, O]
        g2 = gyt.reshape(-1, s.out_channels)
        x2 = xw.reshape(-1, s.in_channels * k)
        self.grads["weight"] += (g2.T @ x2).reshape(s.out_channels, s.in_channels, k)
        self.grads["bias"] += g2.sum(axis=0)

        gxw = (gyt @ w_mat).reshape(gy.shape[:-2] + (n, s.in_channels, k))
        gxw = np.moveaxis(gxw, -3, -1)  # [..., C, K, n] with K before the node axis
        gxp = np.zeros(gy.shape[:-2] + (s.in_channels, n + k - 1))
        for j in range(k):
            gxp[..., j : j + n] += gxw[..., j, :]
        return gxp[..., pad : pad + n]


class DenseLayer(Layer):
    """Affine map y = x W^T + b on the last axis."""

    def init_params(self, rng):
        s = self.spec
        self.params = {
            "weight": _glorot_uniform(rng, (s.out_features, s.in_features), s.in_features, s.out_features),
            "bias": np.zeros(s.out_features),
        }
        self.zero_grads()

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.spec.in_features:
            raise ValueError(f"expected {self.spec.in_features} features, got {x.shape[-1]}")
        self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, gy):
        x = self._cache
        g2 = gy.reshape(-1, gy.shape[-1])
        x2 = x.reshape(-1, x.shape[-1])
        self.grads["weight"] += g2.T @ x2
        self.grads["bias"] += g2.sum(axis=0)
        return gy @ self.params["weight"]


class LeakyReluLayer(Layer):
    """y = x for x > 0, alpha*x otherwise; monotone and continuous at 0."""

    def forward(self, x, train=False, rng=None):
        slope = np.where(x > 0, 1.0, self.spec.alpha)
        self._cache = slope
        return x * slope

    def backward(self, gy):
        return gy * self._cache


class DropoutLayer(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) in train mode."""

    def forward(self, x, train=False, rng=None):
        if not train or self.spec.rate == 0.0:
            self._cache = None
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs a random generator")
        keep = 1.0 - self.spec.rate
        mask = (rng.random(x.shape) >= self.spec.rate) / keep
        self._cache = mask
        return x * mask

    def backward(self, gy):
        if self._cache is None:
            return gy
        return gy * self._cache


class LstmLayer(Layer):
    """Single LSTM layer unrolled over the time axis, zero initial state.

    Gate equations: i, f, o = sigmoid(x W + h U + b); g = tanh(x W + h U + b);
    c' = f*c + i*g; h' = o*tanh(c'). Weights are packed per gate in the
    order (i, f, o, g).
    """

    def init_params(self, rng):
        s = self.spec
        self.params = {
            "w_x": _glorot_uniform(rng, (s.input_size, 4 * s.hidden_size), s.input_size, s.hidden_size),
            "w_h": _glorot_uniform(rng, (s.hidden_size, 4 * s.hidden_size), s.hidden_size, s.hidden_size),
            "bias": np.zeros(4 * s.hidden_size),
        }
        self.zero_grads()

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3:
            raise ValueError(f"LSTM expects [batch, time, features], got shape {x.shape}")
        if x.shape[-1] != self.spec.input_size:
            raise ValueError(f"expected {self.spec.input_size} features, got {x.shape[-1]}")
        b, t, _ = x.shape
        hd = self.spec.hidden_size
        w_x, w_h, bias = self.params["w_x"], self.params["w_h"], self.params["bias"]

        h = np.zeros((b, hd))
        c = np.zeros((b, hd))
        outputs = np.empty((b, t, hd))
        steps = []
        for step in range(t):
            z = x[:, step] @ w_x + h @ w_h + bias
            gates = _sigmoid(z[:, : 3 * hd])
            gi = gates[:, :hd]
            gf = gates[:, hd : 2 * hd]
            go = gates[:, 2 * hd :]
            gg = np.tanh(z[:, 3 * hd :])
            c_prev, h_prev = c, h
            c = gf * c_prev + gi * gg
            tc = np.tanh(c)
            h = go * tc
            outputs[:, step] = h
            steps.append((x[:, step], h_prev, c_prev, gi, gf, go, gg, tc))
        self._cache = steps
        return outputs

    def backward(self, gy):
        steps = self._cache
        b, t, hd = gy.shape
        w_x, w_h = self.params["w_x"], self.params["w_h"]
        gx = np.empty((b, t, self.spec.input_size))
        dh_next = np.zeros((b, hd))
        dc_next = np.zeros((b, hd))
        for step in range(t - 1, -1, -1):
            x_t, h_prev, c_prev, gi, gf, go, gg, tc = steps[step]
            dh = gy[:, step] + dh_next
            do = dh * tc
            dc = dh * go * (1.0 - tc * tc) + dc_next
            di = dc * gg
            df = dc * c_prev
            dg = dc * gi
            dc_next = dc * gf
            dz = np.concatenate(
                [
                    di * gi * (1.0 - gi),
                    df * gf * (1.0 - gf),
                    do * go * (1.0 - go),
                    dg * (1.0 - gg * gg),
                ],
                axis=1,
            )
            self.grads["w_x"] += x_t.T @ dz
            self.grads["w_h"] += h_prev.T @ dz
            self.grads["bias"] += dz.sum(axis=0)
            gx[:, step] = dz @ w_x.T
            dh_next = dz @ w_h.T
        return gx


_LAYER_TYPES = {
    Conv1dSpec: Conv1dLayer,
    LstmSpec: LstmLayer,
    DenseSpec: DenseLayer,
    LeakyReluSpec: LeakyReluLayer,
    DropoutSpec: DropoutLayer,
}


def build_layer(spec) -> Layer:
    return _LAYER_TYPES[type(spec)](spec)
