"""Quasi-Newton coupling acceleration versus constant under-relaxation.

Runs the same reduced benchmark once with IQN-ILS and once per constant
relaxation factor, and compares the mean coupling iterations per window.
"""

import numpy as np

from tubeflow.coupling import CouplingConfig
from tubeflow.domain import FluidParams, TubeParams, build_grid
from tubeflow.fluid import NewtonConfig
from tubeflow.simulate import simulate_classical

grid = build_grid(0.05, 40)
tube = TubeParams()
fluid = FluidParams()
newton = NewtonConfig(jacobian_mode="analytic")


def mean_iters(coupling):
    result = simulate_classical(grid, tube, fluid, newton, coupling, 1e-3, 40)
    return float(np.mean(result.window_iterations))


print(f"IQN-ILS:          {mean_iters(CouplingConfig()):6.2f} iterations/window")
for omega in (0.05, 0.1, 0.2):
    cfg = CouplingConfig(accelerator="constant-relaxation", omega0=omega, max_iters=500)
    print(f"constant w={omega:4.2f}: {mean_iters(cfg):6.2f} iterations/window")
