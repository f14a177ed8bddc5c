"""Classical partitioned simulation of the elastic-tube benchmark.

Runs a reduced benchmark (40 nodes, 40 time steps), prints the coupling
iteration count per time window, and verifies discrete mass conservation
for every accepted step.
"""

import numpy as np

from tubeflow.coupling import CouplingConfig
from tubeflow.domain import FluidParams, TubeParams, build_grid
from tubeflow.fluid import NewtonConfig, mass_balance
from tubeflow.simulate import simulate_classical

grid = build_grid(0.05, 40)
tube = TubeParams()
fluid = FluidParams()
newton = NewtonConfig(jacobian_mode="analytic")

result = simulate_classical(grid, tube, fluid, newton, CouplingConfig(), 1e-3, 40)

iters = np.array(result.window_iterations)
print(f"simulated {len(result.trajectory) - 1} windows")
print(f"coupling iterations: mean {iters.mean():.2f}, max {iters.max()}")

worst = 0.0
states = result.trajectory.states
for k in range(1, len(states)):
    lhs, rhs = mass_balance(states[k - 1], states[k], 1e-3, grid, fluid, True)
    worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
print(f"worst relative mass-balance defect: {worst:.3e}")

final = states[-1]
print(f"final pressure range: [{final.pressure.min():.1f}, {final.pressure.max():.1f}] Pa")
print(f"final area swing: {100 * (final.area.max() / final.area.min() - 1):.2f} %")
