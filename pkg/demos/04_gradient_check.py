"""Verify analytic backpropagation against central finite differences.

Checks every layer type in isolation and then the composed default
architectures at verification scale; all maximum relative errors must be
below 1e-5.
"""

import numpy as np

from tubeflow.nn import (
    Conv1dSpec,
    DenseSpec,
    LeakyReluSpec,
    LstmSpec,
    Network,
    grad_check,
)
from tubeflow.surrogate import TrainConfig, default_fluid_specs, default_solid_specs

rng = np.random.default_rng(0)

cases = {
    "dense": ([DenseSpec(6, 5)], 6, 5),
    "conv1d": ([Conv1dSpec(2, 3, 3), DenseSpec(3 * 8, 4)], 16, 4),
    "lstm": ([LstmSpec(6, 4), DenseSpec(4, 3)], 6, 3),
    "leaky_relu": ([DenseSpec(6, 5), LeakyReluSpec(), DenseSpec(5, 4)], 6, 4),
}
small = TrainConfig(conv_channels=4, lstm_hidden=8, dense_hidden=8)
n = 6
cases["fluid architecture"] = (default_fluid_specs(n, small), 3 * n, 2 * n)
cases["solid architecture"] = (default_solid_specs(n, small), 2 * n, n)

for name, (specs, in_features, out_features) in cases.items():
    net = Network(specs, rng=rng)
    x = rng.normal(size=(2, 3, in_features))
    target = rng.uniform(0.5, 1.5, size=(2, out_features))
    err = grad_check(net, x, target)
    print(f"{name:22s} max relative gradient error = {err:.3e}")
    assert err < 1e-5
print("all gradients verified")
