"""Acceptance suite: one test per exit criterion, each printing a verdict.

Every tolerance is pinned here; run with ``pytest tests/test_acceptance.py -v -s``
to see the per-criterion lines.
"""

import json
import time

import numpy as np
import pytest

from conftest import Problem, driver_settings, smooth_config

from fpsi.cli import main
from fpsi.config import build_problem
from fpsi.driver import InitialData, run_splitting, velocity_cauchy_difference
from fpsi.kinematics import (
    ale_fluid_inverse,
    ale_fluid_map,
    interface_frame,
    jacobian_fluid,
)
from fpsi.mesh import build_grids
from fpsi.plate import PlateState, PlateStepper, assemble_plate_operators
from fpsi.regularize import smooth_displacement
from fpsi.validation import (
    identity_replay,
    korn_suite,
    operator_fd_suite,
    record_from_trajectory,
)


def _verdict(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {status}: {detail}")
    assert ok, detail


def test_criterion_01_plate_energy_equality():
    fluid, biot, plate, layout = build_grids(1.0, 1.0, 8, 8, 2, 2)
    ops = assemble_plate_operators(plate)
    rng = np.random.default_rng(101)
    stepper = PlateStepper(ops, layout, dt=0.004, rho_p=1.0)
    w = rng.normal(size=plate.num_dofs)
    z = rng.normal(size=plate.num_dofs)
    w[layout.plate_mask] = 0.0
    z[layout.plate_mask] = 0.0
    state = PlateState(w, z)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        state, rep = stepper.step(state)
        worst = max(worst, rep.residual)
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        worst <= 1e-10 and elapsed < 5.0,
        f"plate identity residual {worst:.2e} (<=1e-10), 100 steps in {elapsed:.2f}s (<5s)",
    )


def test_criterion_02_coupled_energy_equality_with_replay():
    problem = Problem(cells=(2, 2, 2, 2))
    rng = np.random.default_rng(102)
    st = problem.random_state(rng, amp=0.05)
    data = InitialData(st["u"], st["eta"], st["xi"], st["p"], st["omega"], st["zeta"])
    cfg = smooth_config(cells=(2, 2, 2, 2), T=0.5, N=20, mu_v=0.2, lambda_v=0.1, beta=0.3)
    settings = driver_settings(cfg)
    t0 = time.perf_counter()
    res = run_splitting(problem.layout, cfg.physics, data, settings)
    elapsed = time.perf_counter() - t0
    assert res.completed
    worst_direct = max(e.coupled.identity_residual for e in res.ledger.entries)
    worst_replay = 0.0
    for n in range(1, res.trajectory.steps_committed + 1):
        rep = identity_replay(
            problem.layout, cfg.physics, record_from_trajectory(res.trajectory, n)
        )
        worst_replay = max(worst_replay, rep.coupled_residual, rep.plate_residual)
    _verdict(
        2,
        worst_direct <= 1e-8 and worst_replay <= 1e-8 and elapsed < 60.0,
        f"coupled identity residual {worst_direct:.2e}, independent replay "
        f"{worst_replay:.2e} (<=1e-8), 20 steps in {elapsed:.2f}s (<60s)",
    )


def test_criterion_03_monotone_uniform_bound():
    cfg = smooth_config(N=32, T=0.4, mu_v=0.2, lambda_v=0.1, beta=0.3)
    layout, data = build_problem(cfg)
    res = run_splitting(layout, cfg.physics, data, driver_settings(cfg))
    assert res.completed
    e0 = res.ledger.initial_energy
    worst_slack = min(e.bound_slack for e in res.ledger.entries)
    totals = [e0]
    for e in res.ledger.entries:
        totals.extend([e.energy_half.total, e.energy_full.total])
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(totals, totals[1:]))
    _verdict(
        3,
        worst_slack >= -1e-8 * e0 and monotone,
        f"bound slack min {worst_slack:.3e} (>= {-1e-8 * e0:.1e}), "
        f"energy nonincreasing across all {len(totals) - 1} half steps: {monotone}",
    )


def test_criterion_04_korn_suite():
    fluid, biot, plate, layout = build_grids(1.0, 1.0, 4, 4, 2, 4)
    rep = korn_suite(layout, 1000, seed=104)
    # equality case eta = (y, 0, 0) on the unmasked assembled forms
    from fpsi.coupled import assemble_static_operators

    static = assemble_static_operators(layout)
    coords = biot.node_coords()
    nb = layout.n_biot_q1
    eta = np.zeros(3 * nb)
    eta[:nb] = coords[:, 1]
    margin = float(eta @ (static.biot_sym_grad @ eta)) - 0.5 * float(
        eta @ (static.biot_grad_grad @ eta)
    )
    _verdict(
        4,
        rep.min_margin_relative >= -1e-12 and abs(margin) <= 1e-12,
        f"1000 random fields, min relative margin {rep.min_margin_relative:.3e} "
        f"(>=-1e-12); shear equality case margin {margin:.2e} (|.|<=1e-12)",
    )


def test_criterion_05_geometry_kernels():
    rng = np.random.default_rng(105)
    worst_rt = 0.0
    for _ in range(200):
        R = rng.uniform(0.5, 2.0)
        omega = rng.uniform(-0.9 * R, 2.0 * R)
        zhat = rng.uniform(-R, 0.0)
        p = np.array([rng.uniform(0, 1), rng.uniform(0, 1), zhat])
        back = ale_fluid_inverse(omega, R, ale_fluid_map(omega, R, p))
        worst_rt = max(worst_rt, np.abs(back - p).max())
    omega, R = 0.37, 1.3
    bitexact = jacobian_fluid(omega, R) == 1.0 + omega / R
    jg_err = abs(interface_frame(1.0, 0.0).jacobian - np.sqrt(2.0))
    fd = operator_fd_suite(n_fields=3, seed=105)
    min_order = min(fd.fluid_orders + fd.biot_orders)
    _verdict(
        5,
        worst_rt <= 1e-12 and bitexact and jg_err <= 1e-14 and min_order >= 1.8,
        f"round-trip {worst_rt:.2e} (<=1e-12), volume Jacobian bit-exact: {bitexact}, "
        f"|J_G(1,0)-sqrt2| = {jg_err:.1e} (<=1e-14), FD order min {min_order:.2f} (>=1.8)",
    )


def test_criterion_06_regularization():
    problem = Problem(cells=(4, 4, 2, 4))
    kernel = problem.kernel(delta=0.5, allow_coarse=False)
    mass_err = abs(kernel.weights.sum() - 1.0)
    rng = np.random.default_rng(106)
    lay = problem.layout
    grid = problem.biot
    nx, ny, nz = grid.cells_x, grid.cells_y, grid.cells_z
    worst = 0.0
    for _ in range(50):
        omega = 0.1 * rng.normal(size=lay.n_plate_dofs)
        omega[lay.plate_mask] = 0.0
        eta = 0.1 * rng.normal(size=lay.n_displacement_dofs)
        eta[lay.displacement_mask] = 0.0
        gz = lay.displacement_gamma_z_dofs()
        free = ~lay.displacement_mask[gz]
        ov = lay.transfer.apply(omega)
        eta[gz[free]] = ov[free]
        sm = smooth_displacement(lay, eta, ov, kernel).reshape(3, nx + 1, ny + 1, nz + 1)
        for sl in (sm[:, 0], sm[:, -1], sm[:, :, 0], sm[:, :, -1], sm[:, :, :, -1]):
            worst = max(worst, np.abs(sl).max())
    _verdict(
        6,
        mass_err <= 1e-12 and worst <= 1e-12,
        f"kernel mass error {mass_err:.2e} (<=1e-12), boundary annihilation over "
        f"50 random pairs {worst:.2e} (<=1e-12)",
    )


def test_criterion_07_degeneracy_handling(tmp_path):
    payload = {
        "geometry": {"cells_x": 3, "cells_y": 3, "cells_z_fluid": 2, "cells_z_biot": 2},
        "time": {"T": 0.5, "N": 32},
        "physics": {"rho_p": 20.0},
        "regularization": {"delta": 0.6, "allow_coarse_kernel": True},
        "initial_data": {"preset": "near_degenerate"},
        "monitors": {"displacement_max": 0.6},
    }
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(payload))
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg_path), "--out", str(out)])
    last = json.loads((out / "monitors.jsonl").read_text().strip().split("\n")[-1])
    ok = (
        code == 3
        and last["tripped"]
        and last["violation"] == "plate_gap"
        and last["location"] is not None
        and 0.0 < last["t_max"] < 0.5
        and last["plate_gap_min"] > 0.0  # tripped before the plate reached the floor
    )
    _verdict(
        7,
        ok,
        f"exit code {code} (==3), violation {last['violation']} at node "
        f"{last['location']}, t_max {last['t_max']} in (0, T), gap still positive",
    )


def test_criterion_08_refinement_cauchy():
    diffs = []
    runs = []
    for N in (8, 16, 32):
        cfg = smooth_config(T=0.2, N=N, rho_p=50.0, nu=2.0, mu_v=0.5, beta=0.3)
        layout, data = build_problem(cfg)
        runs.append(run_splitting(layout, cfg.physics, data, driver_settings(cfg)))
        assert runs[-1].completed
    mass = runs[0].static.fluid_mass_flat
    for coarse, fine in zip(runs[:-1], runs[1:]):
        diffs.append(velocity_cauchy_difference(coarse.trajectory, fine.trajectory, mass))
    ratios = [diffs[k + 1] / diffs[k] for k in range(len(diffs) - 1)]
    ok = all(r < 1.0 for r in ratios) and all(d > 0 for d in diffs)
    _verdict(
        8,
        ok,
        f"mean-square velocity differences {[f'{d:.3e}' for d in diffs]} "
        f"strictly decreasing (ratios {[f'{r:.3f}' for r in ratios]})",
    )


def test_criterion_09_purely_elastic_case():
    # criterion 2 configuration with the viscoelastic moduli removed
    problem = Problem(cells=(2, 2, 2, 2))
    rng = np.random.default_rng(109)
    st = problem.random_state(rng, amp=0.05)
    data = InitialData(st["u"], st["eta"], st["xi"], st["p"], st["omega"], st["zeta"])
    cfg = smooth_config(cells=(2, 2, 2, 2), T=0.5, N=20, mu_v=0.0, lambda_v=0.0, beta=0.3)
    res = run_splitting(problem.layout, cfg.physics, data, driver_settings(cfg))
    assert res.completed
    worst = max(e.coupled.identity_residual for e in res.ledger.entries)
    ve_terms = max(
        max(e.coupled.diss_viscoelastic_shear, e.coupled.diss_viscoelastic_bulk)
        for e in res.ledger.entries
    )
    # criterion 3 configuration, purely elastic
    cfg3 = smooth_config(N=32, T=0.4, mu_v=0.0, lambda_v=0.0, beta=0.3)
    layout3, data3 = build_problem(cfg3)
    res3 = run_splitting(layout3, cfg3.physics, data3, driver_settings(cfg3))
    e0 = res3.ledger.initial_energy
    worst_slack = min(e.bound_slack for e in res3.ledger.entries)
    ve3 = max(
        max(e.coupled.diss_viscoelastic_shear, e.coupled.diss_viscoelastic_bulk)
        for e in res3.ledger.entries
    )
    ok = (
        worst <= 1e-8
        and ve_terms == 0.0
        and ve3 == 0.0
        and worst_slack >= -1e-8 * e0
        and res3.ledger.monotone_ok
    )
    _verdict(
        9,
        ok,
        f"purely elastic: identity residual {worst:.2e} (<=1e-8), viscoelastic "
        f"ledger components identically zero, bound slack {worst_slack:.2e}",
    )


def test_criterion_10_determinism(tmp_path):
    payload = {
        "geometry": {"cells_x": 3, "cells_y": 3, "cells_z_fluid": 2, "cells_z_biot": 2},
        "time": {"T": 0.2, "N": 4},
        "physics": {"mu_v": 0.2, "beta": 0.3},
        "regularization": {"delta": 0.6, "allow_coarse_kernel": True},
        "initial_data": {"preset": "smooth"},
    }
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(payload))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(
            ["run", "--config", str(cfg_path), "--out", str(out), "--seed", "3", "--threads", "1"]
        ) == 0
        outs.append((out / "energy_trace.csv").read_bytes())
    ok = outs[0] == outs[1]
    _verdict(10, ok, f"byte-identical energy CSV across repeated runs: {ok}")
