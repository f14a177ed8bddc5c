"""Command-line entry point: simulate / train / rollout / evaluate / verify.

Exit codes: 0 success, 1 numerical or convergence failure, 2 usage or
configuration error. All outputs are CSV for direct plotting.
"""

from __future__ import annotations

import argparse
import os
import sys

# Cap internal parallelism before numpy loads its BLAS; single-threaded by
# default so repeated runs are byte-identical.
_threads = os.environ.get("TUBEFLOW_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, _threads)

import numpy as np  # noqa: E402

from .config import AppConfig, load_config  # noqa: E402
from .coupling import CouplingConfig  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    CouplingDivergenceError,
    NonConvergenceError,
    RolloutError,
    TrainingError,
    TubeflowError,
)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubeflow",
        description="Partitioned FSI lab for the 1D elastic tube: classical "
        "solvers, quasi-Newton coupling, and neural surrogates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI configuration file (defaults apply if omitted)")
        return p

    p = add("simulate", "run the classical implicit-coupled simulation")
    p.add_argument("--out", required=True, help="output trajectory CSV")

    p = add("train", "train the fluid and solid surrogate networks")
    p.add_argument("--reference", required=True, help="training trajectory CSV")
    p.add_argument("--out", required=True, help="output directory for checkpoints")
    p.add_argument("--seed", type=int, help="override the training seed")

    p = add("rollout", "autoregressive coupled rollout of trained surrogates")
    p.add_argument("--models", required=True, help="directory holding the checkpoints")
    p.add_argument("--reference", required=True, help="reference trajectory CSV (seed + horizon)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--explicit", action="store_true", help="single-pass ablation, no coupling iteration")

    p = add("evaluate", "error report for a predicted trajectory against a reference")
    p.add_argument("--predicted", required=True, help="predicted trajectory CSV")
    p.add_argument("--reference", required=True, help="reference trajectory CSV")
    p.add_argument("--out", required=True, help="output report CSV")

    add("verify", "run the built-in numerical verification checks")
    return parser


def _cmd_simulate(cfg: AppConfig, args) -> int:
    from .domain import write_trajectory
    from .simulate import simulate_classical

    try:
        result = simulate_classical(
            cfg.build_grid(),
            cfg.tube_params(),
            cfg.fluid_params(),
            cfg.newton_config(),
            cfg.coupling_config(),
            cfg.fluid.dt,
            cfg.fluid.n_steps,
        )
    except (CouplingDivergenceError, NonConvergenceError) as exc:
        window = getattr(exc, "window", None)
        where = f" in window {window}" if window is not None else ""
        print(f"simulate: divergence{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for k, iters in enumerate(result.window_iterations, start=1):
        print(f"window {k}: {iters} iterations")
    write_trajectory(result.trajectory, args.out)
    print(f"wrote {len(result.trajectory)} states to {args.out}")
    return EXIT_OK


def _write_curve(curve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, train_loss, val_loss in curve:
            f.write("%d,%.17g,%.17g\n" % (epoch, train_loss, val_loss))


def _cmd_train(cfg: AppConfig, args) -> int:
    from pathlib import Path

    from .domain import read_trajectory
    from .nn import save_checkpoint
    from .surrogate import train_surrogates

    traj = read_trajectory(args.reference)
    train_cfg = cfg.train_config(seed_override=args.seed)
    try:
        trained = train_surrogates(traj, train_cfg)
    except TrainingError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(trained.fluid_net, out / "fluid.ckpt")
    save_checkpoint(trained.solid_net, out / "solid.ckpt")
    (out / "norm_stats.json").write_text(trained.stats.to_json(), encoding="utf-8")
    _write_curve(trained.fluid_curve, out / "fluid_loss.csv")
    _write_curve(trained.solid_curve, out / "solid_loss.csv")

    fluid_final = trained.fluid_curve[-1][1] if trained.fluid_curve else float("nan")
    solid_final = trained.solid_curve[-1][1] if trained.solid_curve else float("nan")
    print(f"final training loss: fluid {fluid_final:.6g}, solid {solid_final:.6g}")
    threshold = cfg.training.loss_threshold
    if trained.fluid_curve and (fluid_final > threshold or solid_final > threshold):
        print(f"train: final loss above threshold {threshold:.3g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_rollout(cfg: AppConfig, args) -> int:
    from pathlib import Path

    from .domain import read_trajectory, write_trajectory
    from .nn import load_checkpoint
    from .surrogate import NormStats, coupled_rollout, error_report, write_report_csv

    models = Path(args.models)
    for name in ("fluid.ckpt", "solid.ckpt", "norm_stats.json"):
        if not (models / name).exists():
            print(f"rollout: missing model file {models / name}", file=sys.stderr)
            return EXIT_USAGE
    fluid_net = load_checkpoint(models / "fluid.ckpt")
    solid_net = load_checkpoint(models / "solid.ckpt")
    stats = NormStats.from_json((models / "norm_stats.json").read_text(encoding="utf-8"))

    reference = read_trajectory(args.reference)
    history = cfg.training.history
    if len(reference) <= history:
        print(
            f"rollout: reference has {len(reference)} states, need more than {history}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    n_steps = cfg.rollout.n_steps or (len(reference) - history)
    explicit = args.explicit or cfg.rollout.explicit

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed_states = reference.states[:history]
    try:
        predicted, iters = coupled_rollout(
            fluid_net,
            solid_net,
            seed_states,
            n_steps,
            cfg.coupling_config(),
            stats,
            reference.grid,
            reference.dt,
            explicit=explicit,
        )
    except RolloutError as exc:
        print(f"rollout: {exc}", file=sys.stderr)
        if exc.partial is not None and len(exc.partial) > 0:
            write_trajectory(exc.partial, out / "predicted.csv")
            print(f"wrote partial trajectory to {out / 'predicted.csv'}", file=sys.stderr)
        return EXIT_NUMERICAL

    write_trajectory(predicted, out / "predicted.csv")
    report = error_report(
        predicted, reference, cfg.rollout.checkpoint_times, coupling_iters=iters
    )
    write_report_csv(report, out / "report.csv")
    for t_req, t_used, step, err_p, err_v, err_a in report.checkpoints:
        print(
            f"checkpoint t={t_req:g} (step {step}, t={t_used:g}): "
            f"err_p={err_p:.4g} err_v={err_v:.4g} err_a={err_a:.4g}"
        )
    return EXIT_OK


def _cmd_evaluate(cfg: AppConfig, args) -> int:
    from .domain import read_trajectory
    from .surrogate import error_report, write_report_csv

    predicted = read_trajectory(args.predicted)
    reference = read_trajectory(args.reference)
    report = error_report(predicted, reference, cfg.rollout.checkpoint_times)
    write_report_csv(report, args.out)
    for t_req, t_used, step, err_p, err_v, err_a in report.checkpoints:
        print(
            f"checkpoint t={t_req:g} (step {step}, t={t_used:g}): "
            f"err_p={err_p:.4g} err_v={err_v:.4g} err_a={err_a:.4g}"
        )
    return EXIT_OK


def _cmd_verify(cfg: AppConfig, args) -> int:
    checks = []

    # Structure equilibrium on random admissible pressures.
    from .structure import circumferential_stress, radius_from_pressure, singular_pressure

    tube = cfg.tube_params()
    rng = np.random.default_rng(12345)
    p_sing = singular_pressure(tube)
    pressures = rng.uniform(-p_sing, p_sing * (1.0 - 2e-6), size=1000)
    worst = 0.0
    for p in pressures:
        r = radius_from_pressure(p, tube)
        resid = abs(p * r - circumferential_stress(r, tube) * tube.h)
        worst = max(worst, resid / max(1.0, abs(p * r)))
    checks.append(("structure equilibrium residual", worst < 1e-9, f"max {worst:.3e}"))

    # Fluid steady state: uniform state must be an exact fixed point.
    from .domain import FieldState
    from .fluid import solve_fluid_step
    from .simulate import initial_state

    grid = cfg.build_grid()
    fluid_params = cfg.fluid_params()
    import dataclasses

    quiet = dataclasses.replace(fluid_params, inlet_dv=0.0)
    state0 = initial_state(grid, tube, quiet)
    result = solve_fluid_step(
        state0, state0.area, cfg.fluid.dt, grid, quiet, cfg.newton_config(), cfg.fluid.dt
    )
    steady_ok = result.newton_iters == 1 and result.final_residual == 0.0
    checks.append(
        ("fluid steady state", steady_ok, f"iters={result.newton_iters}, residual={result.final_residual:.3e}")
    )

    # IQN-ILS exactness on affine maps of dimension 1..3.
    from .coupling import IqnHistory, iqn_ils_step

    iqn_ok = True
    detail = []
    for dim in (1, 2, 3):
        rng_map = np.random.default_rng(100 + dim)
        amat = rng_map.uniform(-0.4, 0.4, size=(dim, dim))
        bvec = rng_map.uniform(-1.0, 1.0, size=dim)
        exact = np.linalg.solve(np.eye(dim) - amat, bvec)
        x = np.zeros(dim)
        history = IqnHistory()
        converged_at = None
        for iteration in range(1, dim + 2):
            xt = amat @ x + bvec
            if np.linalg.norm(xt - x) <= 1e-12 * max(1.0, np.linalg.norm(exact)):
                converged_at = iteration
                break
            x, history = iqn_ils_step(history, x, xt, CouplingConfig(omega0=0.5))
        err = np.linalg.norm(x - exact)
        ok = err <= 1e-10 * max(1.0, np.linalg.norm(exact))
        iqn_ok = iqn_ok and ok
        detail.append(f"d={dim} err={err:.2e}")
    checks.append(("iqn-ils affine exactness", iqn_ok, ", ".join(detail)))

    # Gradient fidelity of both default architectures at verification scale.
    from .nn import grad_check
    from .nn.network import Network
    from .surrogate import TrainConfig, default_fluid_specs, default_solid_specs

    small = TrainConfig(lstm_hidden=8, dense_hidden=8, conv_channels=4)
    n_small = 6
    grad_ok = True
    detail = []
    for label, specs, out_dim in (
        ("fluid", default_fluid_specs(n_small, small), 2 * n_small),
        ("solid", default_solid_specs(n_small, small), n_small),
    ):
        rng_net = np.random.default_rng(7)
        net = Network(specs, rng=rng_net)
        in_features = specs[0].in_channels * n_small
        x = rng_net.normal(size=(1, 3, in_features))
        target = rng_net.uniform(0.5, 1.5, size=(1, out_dim)) * rng_net.choice([-1.0, 1.0], size=(1, out_dim))
        err = grad_check(net, x, target)
        grad_ok = grad_ok and err < 1e-5
        detail.append(f"{label} max rel err {err:.2e}")
    checks.append(("grad_check", grad_ok, ", ".join(detail)))

    all_ok = True
    for name, ok, info in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({info})")
        all_ok = all_ok and ok
    return EXIT_OK if all_ok else EXIT_NUMERICAL


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "rollout": _cmd_rollout,
    "evaluate": _cmd_evaluate,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TubeflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
