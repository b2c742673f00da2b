"""Command line entry points.

Subcommands:

* ``run`` - run a preset or a config file, writing metrics.csv, the final
  particle scatter, optional field snapshots and a gnuplot script.
* ``oracle-compare`` - evolve the grid field along a recorded trajectory and
  compare it with the free-space quadrature oracle at probe points.
* ``lyapunov`` - print the decay-certificate constants for a preset and write
  a certification series for one planar trajectory.
* ``cm-decay`` - integrate the centre-of-mass memory equation and write the
  series.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .core import DomainSpec, ModelParams, ParticleState
from .field import ScalarField, cn_step, rasterize_sources, sample_field
from .greens import QuadratureSpec, TrajectoryRecord, oracle_f
from .harness import parse_config, preset, run_config, scale_config, write_outputs
from .linearized import integrate_cm, integrate_planar, lyapunov_constants

__all__ = ["main", "read_trajectory_file", "write_trajectory_file", "read_probes_file"]


def write_trajectory_file(traj: TrajectoryRecord, path: str) -> None:
    """Text trajectory format: a ``roles`` line, then ``t x1 y1 ... xN yN`` rows."""
    lines = ["roles " + " ".join(str(int(r)) for r in traj.roles)]
    for k, t in enumerate(traj.times):
        flat = " ".join(f"{v:.17g}" for v in traj.positions[k].ravel())
        lines.append(f"{t:.17g} {flat}")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trajectory_file(path: str) -> TrajectoryRecord:
    with open(path) as fh:
        first = fh.readline().split()
        if not first or first[0] != "roles":
            raise ValueError(f"{path}: first line must be 'roles r1 ... rN'")
        roles = np.array([int(tok) for tok in first[1:]], dtype=np.int8)
        body = np.loadtxt(fh, ndmin=2)
    n = roles.size
    if body.shape[1] != 1 + 2 * n:
        raise ValueError(f"{path}: rows must have 1 + 2N = {1 + 2 * n} columns")
    times = body[:, 0]
    positions = body[:, 1:].reshape(body.shape[0], n, 2)
    return TrajectoryRecord(times=times, positions=positions, roles=roles)


def read_probes_file(path: str) -> np.ndarray:
    """Probe list: whitespace-separated ``x y t`` rows, '#' comments allowed."""
    probes = np.loadtxt(path, comments="#", ndmin=2)
    if probes.shape[1] != 3:
        raise ValueError(f"{path}: probe rows must be 'x y t'")
    return probes


def _cmd_run(args) -> int:
    if (args.preset is None) == (args.config is None):
        print("run: exactly one of --preset or --config is required", file=sys.stderr)
        return 1
    if args.preset is not None:
        config = preset(args.preset, seed=args.seed if args.seed is not None else 0)
    else:
        with open(args.config) as fh:
            config = parse_config(fh.read())
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, outputs=replace(config.outputs, directory=args.out))
    if args.snapshot_every is not None:
        config = replace(config, step=replace(config.step, snapshot_every=args.snapshot_every))
    if args.t_end is not None:
        config = replace(config, step=replace(config.step, t_end=args.t_end))
    if args.scale is not None:
        config = scale_config(config, args.scale)
    if args.save_fields:
        config = replace(config, outputs=replace(config.outputs, save_fields=True))
    record = run_config(config)
    outdir = write_outputs(record, config)
    last = record.samples[-1]
    print(f"wrote {outdir}/metrics.csv ({len(record.samples)} samples, {record.steps} steps)")
    print(f"final: t={last.t:g} fl_x={last.fl_x:.6g} fl_v={last.fl_v:.6g} |v_cm|={last.v_cm_norm:.6g}")
    return 0


def _cmd_oracle_compare(args) -> int:
    traj = read_trajectory_file(args.trajectory)
    probes = read_probes_file(args.probes)
    if np.any(probes[:, 2] < 0) or np.any(probes[:, 2] > traj.t_end + 1e-9):
        print("oracle-compare: probe times must lie within the trajectory", file=sys.stderr)
        return 1
    domain = DomainSpec(lx=args.lx, ly=args.lx, nx=args.nx, ny=args.nx)
    params = ModelParams(beta=0.0, sigma=0.5, gamma=0.0, diffusion=args.diffusion,
                         xi=args.xi, n_particles=traj.roles.size)
    quad = QuadratureSpec(tol_rel=args.tol)

    # Evolve the grid field along the recorded trajectory, sampling each probe
    # at the step closest to its requested time.
    order = np.argsort(probes[:, 2], kind="stable")
    f = ScalarField.zeros(domain)
    dt = args.dt
    n_steps = int(np.ceil(traj.t_end / dt - 1e-12))
    f_solver = np.empty(probes.shape[0])
    pending = list(order)
    for k in range(n_steps):
        t = k * dt
        while pending and probes[pending[0], 2] <= t + 0.5 * dt:
            idx = pending.pop(0)
            f_solver[idx] = sample_field(f, probes[idx, :2])[0]
        if not pending:
            break
        state = ParticleState(
            positions=traj.positions_at(t), velocities=np.zeros((traj.roles.size, 2)), roles=traj.roles
        )
        f = cn_step(f, rasterize_sources(state, domain), params, dt)
    for idx in pending:
        f_solver[idx] = sample_field(f, probes[idx, :2])[0]

    lines = ["x,y,t,f_solver,f_oracle,rel_err"]
    for i, (x, y, t) in enumerate(probes):
        fo = oracle_f(np.array([x, y]), t, traj, params, quad)
        rel = abs(f_solver[i] - fo) / max(fo, 1e-6)
        lines.append(f"{x:.17g},{y:.17g},{t:.17g},{f_solver[i]:.17g},{fo:.17g},{rel:.17g}")
    with open(args.out + ".tmp", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(args.out + ".tmp", args.out)
    print(f"wrote {args.out} ({probes.shape[0]} probes)")
    return 0


def _cmd_lyapunov(args) -> int:
    config = preset(args.preset)
    constants = lyapunov_constants(args.tbar, config.params)
    for name in ("t_bar", "g_lo", "g_hi", "psi_lo", "psi_hi", "psi_dot_hi", "k", "k1", "k2", "k3"):
        print(f"{name} = {getattr(constants, name):.12g}")
    print(f"decay_rate = {constants.decay_rate:.12g}")
    series = integrate_planar(
        args.v0, args.x0, config.params, t_end=args.t_end, dt=args.dt, t_bar=args.tbar
    )
    i_bar = int(np.searchsorted(series.t, args.tbar))
    y_bar = float(np.hypot(series.v[i_bar], series.x[i_bar]))
    env = series.constants.decay_envelope(y_bar, series.t)
    lines = ["t,v,x,u,envelope"]
    for t, v, x, u, e in zip(series.t, series.v, series.x, series.u, env):
        lines.append(f"{t:.17g},{v:.17g},{x:.17g},{u:.17g},{e:.17g}")
    with open(args.out + ".tmp", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(args.out + ".tmp", args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_cm_decay(args) -> int:
    config = preset(args.preset)
    series = integrate_cm(args.v0, config.params, t_end=args.t_end, dt=args.dt)
    lines = ["t,v_cm"]
    for t, v in zip(series.t, series.v):
        lines.append(f"{t:.17g},{v:.17g}")
    with open(args.out + ".tmp", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(args.out + ".tmp", args.out)
    print(f"wrote {args.out} (final v = {series.v[-1]:.6g})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemoflock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a preset or config file")
    run_p.add_argument("--preset", type=int, choices=range(1, 10), metavar="K")
    run_p.add_argument("--config", type=str, metavar="FILE")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", type=str, metavar="DIR")
    run_p.add_argument("--snapshot-every", type=int, metavar="M")
    run_p.add_argument("--t-end", type=float, metavar="T")
    run_p.add_argument("--scale", type=float, metavar="F",
                       help="coarsen grid and timestep by F for desk-scale runs")
    run_p.add_argument("--save-fields", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    oc = sub.add_parser("oracle-compare", help="compare grid solver against the quadrature oracle")
    oc.add_argument("--trajectory", required=True, metavar="FILE")
    oc.add_argument("--probes", required=True, metavar="FILE")
    oc.add_argument("--out", required=True, metavar="FILE")
    oc.add_argument("--lx", type=float, default=50.0)
    oc.add_argument("--nx", type=int, default=200)
    oc.add_argument("--dt", type=float, default=0.01)
    oc.add_argument("--diffusion", type=float, default=1.0)
    oc.add_argument("--xi", type=float, default=0.5)
    oc.add_argument("--tol", type=float, default=1e-6)
    oc.set_defaults(func=_cmd_oracle_compare)

    ly = sub.add_parser("lyapunov", help="decay-certificate constants and series")
    ly.add_argument("--preset", type=int, choices=range(1, 10), required=True, metavar="K")
    ly.add_argument("--tbar", type=float, required=True, metavar="T")
    ly.add_argument("--out", required=True, metavar="FILE")
    ly.add_argument("--v0", type=float, default=1.0)
    ly.add_argument("--x0", type=float, default=0.5)
    ly.add_argument("--t-end", type=float, default=30.0)
    ly.add_argument("--dt", type=float, default=1e-3)
    ly.set_defaults(func=_cmd_lyapunov)

    cm = sub.add_parser("cm-decay", help="centre-of-mass memory equation series")
    cm.add_argument("--preset", type=int, choices=range(1, 10), required=True, metavar="K")
    cm.add_argument("--v0", type=float, required=True, metavar="V")
    cm.add_argument("--out", required=True, metavar="FILE")
    cm.add_argument("--t-end", type=float, default=600.0)
    cm.add_argument("--dt", type=float, default=0.01)
    cm.set_defaults(func=_cmd_cm_decay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"chemoflock {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
