"""Command-line entry point.

Subcommands
-----------
run            execute the splitting scheme for a JSON configuration and
               write the energy trace (CSV + figures), monitor log, field
               dumps and manifest.
validate       run the oracle suites (Korn sampling, operator finite
               differences, energy-identity replay with a sensitivity probe,
               dense plate oracle) and write a machine-readable report.
refine-study   repeat the configured run with doubled step counts and write
               the mean-square differences of consecutive fluid velocities.
dump-geometry  write interface frames and deformation Jacobians of the
               configured initial state.

Exit codes: 0 success, 2 configuration error, 3 monitor trip (outputs are
still written), 4 failed acceptance-grade check, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, build_problem, driver_settings, parse_config
from .driver import run_splitting, velocity_cauchy_difference
from .errors import CompatibilityError, ConfigError, FpsiError, SolveError
from .kinematics import build_geometry_cache
from .mesh import trace_z
from .outputs import write_outputs
from .plate import PlateState, PlateStepper, assemble_plate_operators
from .regularize import smooth_displacement
from .validation import (
    OracleConfig,
    identity_replay,
    korn_suite,
    operator_fd_suite,
    plate_dense_oracle,
    record_from_trajectory,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MONITOR_TRIP = 3
EXIT_CHECK_FAILED = 4
EXIT_SOLVER = 5


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    p.add_argument("--out", type=Path, default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--threads", type=int, default=1, help="advisory thread count")
    p.add_argument("--tol", type=float, default=None, help="identity tolerance override")


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output.directory = str(args.out)
    if args.tol is not None:
        cfg.solver.identity_tol_plate = args.tol
        cfg.solver.identity_tol_coupled = args.tol
    cfg.validate()
    return cfg


def _execute_run(cfg: RunConfig):
    layout, data = build_problem(cfg)
    settings = driver_settings(cfg)
    return layout, run_splitting(layout, cfg.physics, data, settings)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    layout, result = _execute_run(cfg)
    wall = time.perf_counter() - t0
    outdir = Path(cfg.output.directory)
    manifest = write_outputs(result, cfg, outdir, wall, {"threads": args.threads})
    if cfg.output.figures:
        from .figures import render_report

        render_report(result.ledger, result.monitor_history, outdir)
    if result.tripped:
        print(f"monitor trip at t_max = {result.t_max}; outputs in {outdir}")
        return EXIT_MONITOR_TRIP
    if not (result.ledger.all_identities_ok and result.ledger.bound_ok):
        print("energy identity or bound check failed; see energy_trace.csv")
        return EXIT_CHECK_FAILED
    print(f"run complete: {result.trajectory.steps_committed} steps, outputs in {outdir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)

    oracle = OracleConfig(seed=cfg.seed, replay_tol=cfg.solver.identity_tol_coupled)
    layout, _ = build_problem(cfg)
    korn = korn_suite(layout, oracle.korn_samples, seed=oracle.seed, tol=oracle.korn_tol)

    fd = operator_fd_suite(
        cfg.geometry.L,
        cfg.geometry.R,
        n_fields=oracle.fd_fields,
        seed=oracle.seed,
        min_order=oracle.fd_min_order,
    )

    # Identity replay on a short smooth run of the configured problem.
    replay_cfg = RunConfig()
    replay_cfg.geometry = cfg.geometry
    replay_cfg.physics = replace(cfg.physics, mu_v=max(cfg.physics.mu_v, 0.1), beta=max(cfg.physics.beta, 0.1))
    replay_cfg.regularization = cfg.regularization
    replay_cfg.time.T = cfg.time.T
    replay_cfg.time.N = 2
    replay_cfg.initial_data.preset = "smooth"
    replay_cfg.seed = cfg.seed
    layout2, data = build_problem(replay_cfg)
    result = run_splitting(layout2, replay_cfg.physics, data, driver_settings(replay_cfg))
    steps = []
    all_ok = True
    tol = oracle.replay_tol
    for n in range(1, result.trajectory.steps_committed + 1):
        rec = record_from_trajectory(result.trajectory, n)
        rep = identity_replay(layout2, replay_cfg.physics, rec, tol=tol)
        steps.append(
            {
                "step": n,
                "plate_residual": rep.plate_residual,
                "coupled_residual": rep.coupled_residual,
                "ok": bool(rep.ok),
            }
        )
        all_ok = all_ok and rep.ok

    # Sensitivity probe: a perturbed state must break the identity.
    rec = record_from_trajectory(result.trajectory, 1)
    u_bad = rec.u_new.copy()
    free = np.flatnonzero(~layout2.velocity_mask)
    u_bad[free[0]] += 1e-3
    rep_bad = identity_replay(layout2, replay_cfg.physics, replace(rec, u_new=u_bad))
    sensitivity_ok = rep_bad.coupled_residual > 1e-6

    # Dense plate oracle on the configured plate grid.
    pops = assemble_plate_operators(layout.plate)
    from .config import plate_bump_coefficients

    omega0 = plate_bump_coefficients(layout.plate, 0.05 * cfg.geometry.R)
    zeta0 = plate_bump_coefficients(layout.plate, 0.1 * cfg.geometry.R)
    omega0[layout.plate_mask] = 0.0
    zeta0[layout.plate_mask] = 0.0
    dt = cfg.time.T / max(cfg.time.N, 1)
    stepper = PlateStepper(pops, layout, dt, cfg.physics.rho_p)
    free_p = np.flatnonzero(~layout.plate_mask)
    md = pops.mass[np.ix_(free_p, free_p)].toarray()
    kd = pops.bending[np.ix_(free_p, free_p)].toarray()
    om_d, ze_d = plate_dense_oracle(md, kd, omega0[free_p], zeta0[free_p], dt, cfg.physics.rho_p, 20)
    state = PlateState(omega0, zeta0)
    dev = 0.0
    for k in range(20):
        state, _ = stepper.step(state)
        scale = max(np.abs(om_d[k + 1]).max(), 1e-30)
        dev = max(dev, np.abs(state.omega[free_p] - om_d[k + 1]).max() / scale)
    plate_ok = dev <= 1e-9

    report = {
        "seed": cfg.seed,
        "korn": {
            "samples": korn.samples,
            "min_margin": korn.min_margin,
            "min_margin_relative": korn.min_margin_relative,
            "crosscheck_deviation": korn.crosscheck_deviation,
            "ok": bool(korn.ok),
        },
        "operator_fd": {
            "fluid_orders": fd.fluid_orders,
            "biot_orders": fd.biot_orders,
            "ok": bool(fd.ok),
        },
        "replay": {"steps": steps, "sensitivity_residual": rep_bad.coupled_residual,
                   "sensitivity_ok": bool(sensitivity_ok), "ok": bool(all_ok)},
        "plate_oracle": {"max_relative_deviation": dev, "ok": bool(plate_ok)},
    }
    report["ok"] = bool(korn.ok and fd.ok and all_ok and sensitivity_ok and plate_ok)
    (outdir / "validation_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    print(f"validation {'passed' if report['ok'] else 'FAILED'}; report in {outdir}")
    return EXIT_OK if report["ok"] else EXIT_CHECK_FAILED


def cmd_refine_study(args) -> int:
    cfg = _load_config(args)
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    levels = args.levels

    step_counts = [cfg.time.N * 2**k for k in range(levels)]
    runs = []
    for N in step_counts:
        level_cfg = RunConfig()
        level_cfg.geometry = cfg.geometry
        level_cfg.physics = cfg.physics
        level_cfg.regularization = cfg.regularization
        level_cfg.monitors = cfg.monitors
        level_cfg.initial_data = cfg.initial_data
        level_cfg.solver = cfg.solver
        level_cfg.time.T = cfg.time.T
        level_cfg.time.N = N
        layout, data = build_problem(level_cfg)
        runs.append(run_splitting(layout, cfg.physics, data, driver_settings(level_cfg)))
        if runs[-1].tripped:
            print(f"refinement run N={N} tripped a monitor; aborting study")
            return EXIT_MONITOR_TRIP

    static = runs[0].static
    diffs = []
    for coarse, fine in zip(runs[:-1], runs[1:]):
        diffs.append(
            velocity_cauchy_difference(
                coarse.trajectory, fine.trajectory, static.fluid_mass_flat
            )
        )
    lines = ["N_coarse,N_fine,cauchy_sq,ratio"]
    for k, d in enumerate(diffs):
        ratio = d / diffs[k - 1] if k > 0 else float("nan")
        lines.append(f"{step_counts[k]},{step_counts[k + 1]},{d:.17g},{ratio:.17g}")
    (outdir / "refine_study.csv").write_text("\n".join(lines) + "\n")

    if cfg.output.figures and len(diffs) >= 1:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(step_counts[:-1], diffs, "o-")
        ax.set_xlabel("coarse step count")
        ax.set_ylabel("mean-square velocity difference")
        ax.set_title("time-step refinement study")
        fig.tight_layout()
        fig.savefig(outdir / "refine_study.png", dpi=150)
        plt.close(fig)

    decreasing = all(diffs[k + 1] < diffs[k] for k in range(len(diffs) - 1))
    print(f"refine-study differences: {diffs} (decreasing: {decreasing})")
    return EXIT_OK if decreasing else EXIT_CHECK_FAILED


def cmd_dump_geometry(args) -> int:
    cfg = _load_config(args)
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    layout, data = build_problem(cfg)
    settings = driver_settings(cfg)
    eta_s = smooth_displacement(
        layout, data.displacement, trace_z(layout, data.displacement), settings.kernel
    )
    cache = build_geometry_cache(layout, data.omega, np.zeros_like(data.zeta), eta_s)

    ic = cache.interface
    lines = ["# element quad x y nx ny nz t1x t1y t1z t2x t2y t2z J_G ndx ndy ndz"]
    ne2, nqf = ic.frame.jacobian.shape
    for e in range(ne2):
        for q in range(nqf):
            vals = [
                *ic.frame.normal[e, q],
                *ic.frame.tau1[e, q],
                *ic.frame.tau2[e, q],
                ic.frame.jacobian[e, q],
                *ic.reg_normal[e, q],
            ]
            lines.append(f"{e} {q} " + " ".join(format(v, '.17g') for v in vals))
    (outdir / "geometry_interface.txt").write_text("\n".join(lines) + "\n")

    geom = cache.biot.geom
    norms, inv_norms = geom.operator_norms()
    lines = ["# element quad J norm inv_norm"]
    ne, nq = geom.jacobian.shape
    for e in range(ne):
        for q in range(nq):
            lines.append(
                f"{e} {q} {geom.jacobian[e, q]:.17g} {norms[e, q]:.17g} {inv_norms[e, q]:.17g}"
            )
    (outdir / "geometry_porous.txt").write_text("\n".join(lines) + "\n")

    lines = ["# element quad J_f"]
    nef, nqf3 = cache.fluid.jac.shape
    for e in range(nef):
        for q in range(nqf3):
            lines.append(f"{e} {q} {cache.fluid.jac[e, q]:.17g}")
    (outdir / "geometry_fluid.txt").write_text("\n".join(lines) + "\n")
    print(f"geometry fields written to {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpsi",
        description="energy-audited splitting solver for the fluid / porous-layer / plate system",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a configured run")
    _add_common(p_run)
    p_val = sub.add_parser("validate", help="run the oracle suites")
    _add_common(p_val)
    p_ref = sub.add_parser("refine-study", help="time-step refinement study")
    _add_common(p_ref)
    p_ref.add_argument("--levels", type=int, default=3, help="number of refinement levels")
    p_dump = sub.add_parser("dump-geometry", help="write geometry fields of the initial state")
    _add_common(p_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "validate": cmd_validate,
        "refine-study": cmd_refine_study,
        "dump-geometry": cmd_dump_geometry,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompatibilityError as exc:
        print(f"initial-data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolveError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FpsiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
