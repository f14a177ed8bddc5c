"""Train small surrogates on a short run and roll them out under coupling.

This is a desk-scale version of the full pipeline: simulate a reference,
train the fluid and solid networks on sliding windows, then predict the
tail of the trajectory autoregressively with the implicit coupling loop
and report per-checkpoint errors.
"""

from tubeflow.coupling import CouplingConfig
from tubeflow.domain import FluidParams, TubeParams, build_grid
from tubeflow.fluid import NewtonConfig
from tubeflow.simulate import simulate_classical
from tubeflow.surrogate import TrainConfig, coupled_rollout, error_report, train_surrogates

grid = build_grid(0.05, 30)
result = simulate_classical(
    grid, TubeParams(), FluidParams(), NewtonConfig(jacobian_mode="analytic"),
    CouplingConfig(), 1e-3, 40,
)
reference = result.trajectory

cfg = TrainConfig(epochs=400, batch_size=16, conv_channels=4, lstm_hidden=16, dense_hidden=32)
trained = train_surrogates(reference, cfg)
print(f"final training loss: fluid {trained.fluid_curve[-1][1]:.3e}, "
      f"solid {trained.solid_curve[-1][1]:.3e}")

seed = reference.states[: cfg.history]
predicted, iters = coupled_rollout(
    trained.fluid_net, trained.solid_net, seed, 20,
    CouplingConfig(), trained.stats, grid, reference.dt,
)
report = error_report(predicted, reference, checkpoint_times=(0.015, 0.030))
for t_req, t_used, step, err_p, err_v, err_a in report.checkpoints:
    print(f"t={t_used:.3f}s (step {step}): err_p={err_p:.3g} err_v={err_v:.3g} err_a={err_a:.3g}")
print(f"coupling iterations per predicted step: {iters}")
