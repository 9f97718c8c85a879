import numpy as np
import scipy.linalg
import scipy.sparse as sp

from fpsi.coupled import (
    BiotState,
    FluidState,
    assemble_biot_forms,
    assemble_fluid_forms,
    assemble_interface_forms,
    assemble_full_system,
    build_prolongation,
    fluid_biot_step,
)
from fpsi.kinematics import build_geometry_cache
from fpsi.params import PhysicsParams
from fpsi.plate import PlateState, PlateStepper
from fpsi.regularize import smooth_displacement
from fpsi.validation import _NodalField, _PlateField, _gauss01, _split

PARAMS = PhysicsParams(
    rho_b=1.2, c0=0.8, alpha=0.9, kappa=1.5, mu_e=1.1, lambda_e=0.7,
    mu_v=0.3, lambda_v=0.2, rho_p=1.4, nu=0.6, beta=0.5,
)


def make_step_context(problem, rng, params=PARAMS, dt=0.05, amp=0.05):
    """Random admissible lagged state, plate substep and geometry cache."""
    lay = problem.layout
    st = problem.random_state(rng, amp)
    stepper = PlateStepper(problem.plate_ops, lay, dt, params.rho_p)
    half, plate_report = stepper.step(PlateState(st["omega"], st["zeta"]))
    eta_s = smooth_displacement(
        lay, st["eta"], lay.transfer.apply(st["omega"]), problem.kernel()
    )
    cache = build_geometry_cache(lay, st["omega"], half.zeta, eta_s)
    return st, half, eta_s, cache, plate_report


# ---------------------------------------------------------------------------
# Brute-force quadrature oracles (independent pointwise field evaluation)


def _fluid_form_oracle(problem, cache, omega, zeta_half, kind, x, y, params, u_old=None):
    """Volume form value by scalar loops over the same Gauss rule."""
    lay = problem.layout
    grid = lay.fluid
    R = problem.R
    n2 = lay.n_fluid_q2
    hx, hy, hz = grid.spacing
    nq, wq = _gauss01(4)
    xf = _NodalField(grid, _split(x, n2), 2)
    yf = _NodalField(grid, _split(y, n2), 2)
    un = _NodalField(grid, _split(u_old, n2), 2) if u_old is not None else None
    wpl = _PlateField(lay, omega)
    zpl = _PlateField(lay, zeta_half)
    _, _, zs = grid.axis_nodes()
    total = 0.0
    from fpsi.kinematics import PlateGeometryEval, transformed_fluid_gradient

    for ei in range(grid.cells_x):
        for ej in range(grid.cells_y):
            for ek in range(grid.cells_z):
                for a, wa in zip(nq, wq):
                    for b, wb in zip(nq, wq):
                        px, py = (ei + a) * hx, (ej + b) * hy
                        pw = wpl.eval(px, py)
                        geom = PlateGeometryEval(pw[0], pw[1], pw[2])
                        jac = 1.0 + pw[0] / R
                        zv = zpl.eval(px, py)[0]
                        for c, wc in zip(nq, wq):
                            pz = zs[0] + (ek + c) * hz
                            w = wa * wb * wc * hx * hy * hz
                            vx, gx = xf.eval(px, py, pz)
                            vy, gy = yf.eval(px, py, pz)
                            if kind == "mass":
                                total += w * jac * vy @ vx
                            elif kind == "reaction":
                                total += w * zv / (2 * R) * vy @ vx
                            elif kind == "viscous":
                                tx = np.stack(
                                    [transformed_fluid_gradient(geom, np.array([px, py, pz]), gx[i], R) for i in range(3)]
                                )
                                ty = np.stack(
                                    [transformed_fluid_gradient(geom, np.array([px, py, pz]), gy[i], R) for i in range(3)]
                                )
                                dx_ = 0.5 * (tx + tx.T)
                                dy_ = 0.5 * (ty + ty.T)
                                total += 2 * params.nu * w * jac * np.sum(dx_ * dy_)
                            elif kind == "convection":
                                vu, _ = un.eval(px, py, pz)
                                adv = vu.copy()
                                adv[2] -= zv * (R + pz) / R
                                tx = np.stack(
                                    [transformed_fluid_gradient(geom, np.array([px, py, pz]), gx[i], R) for i in range(3)]
                                )
                                ty = np.stack(
                                    [transformed_fluid_gradient(geom, np.array([px, py, pz]), gy[i], R) for i in range(3)]
                                )
                                total += 0.5 * w * jac * ((tx @ adv) @ vy - (ty @ adv) @ vx)
    return total


def test_fluid_forms_match_scalar_oracle(tiny):
    rng = np.random.default_rng(31)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    fb = assemble_fluid_forms(lay, cache, PARAMS, st["u"])
    x = rng.normal(size=lay.n_velocity_dofs)
    y = rng.normal(size=lay.n_velocity_dofs)
    mass_vec = sp.block_diag([fb.mass_weighted] * 3).tocsr()

    val = float(y @ (mass_vec @ x))
    oracle = _fluid_form_oracle(tiny, cache, st["omega"], half.zeta, "mass", x, y, PARAMS)
    assert abs(val - oracle) <= 1e-12 * max(1.0, abs(oracle))

    val = float(y @ (fb.viscous @ x))
    oracle = _fluid_form_oracle(tiny, cache, st["omega"], half.zeta, "viscous", x, y, PARAMS)
    assert abs(val - oracle) <= 1e-11 * max(1.0, abs(oracle))

    val = float(y @ (fb.reaction @ x))
    oracle = _fluid_form_oracle(tiny, cache, st["omega"], half.zeta, "reaction", x, y, PARAMS)
    assert abs(val - oracle) <= 1e-12 * max(1.0, abs(oracle))

    val = float(y @ (fb.convection @ x))
    oracle = _fluid_form_oracle(
        tiny, cache, st["omega"], half.zeta, "convection", x, y, PARAMS, u_old=st["u"]
    )
    assert abs(val - oracle) <= 1e-11 * max(1.0, abs(oracle))


def test_flat_geometry_blocks(tiny):
    lay = tiny.layout
    zero_pl = np.zeros(lay.n_plate_dofs)
    eta_s = np.zeros(lay.n_displacement_dofs)
    cache = build_geometry_cache(lay, zero_pl, zero_pl, eta_s)
    fb = assemble_fluid_forms(lay, cache, PARAMS, np.zeros(lay.n_velocity_dofs))
    # convection with zero advecting field vanishes identically
    assert fb.convection.nnz == 0 or np.abs(fb.convection.data).max() == 0.0
    assert fb.reaction.nnz == 0 or np.abs(fb.reaction.data).max() == 0.0
    # viscous block reduces to the flat symmetric-gradient form: compare with
    # a rebuilt cache carrying an identical flat geometry (sanity identity)
    rng = np.random.default_rng(32)
    x = rng.normal(size=lay.n_velocity_dofs)
    val = float(x @ (fb.viscous @ x))
    oracle = _fluid_form_oracle(tiny, cache, zero_pl, zero_pl, "viscous", x, x, PARAMS)
    assert abs(val - oracle) <= 1e-11 * max(1.0, abs(oracle))


def test_convection_skew_exact(tiny):
    rng = np.random.default_rng(33)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    fb = assemble_fluid_forms(tiny.layout, cache, PARAMS, st["u"])
    skew = fb.convection + fb.convection.T
    assert np.abs(skew.data).max() if skew.nnz else 0.0 == 0.0
    x = rng.normal(size=tiny.layout.n_velocity_dofs)
    assert abs(x @ (fb.convection @ x)) <= 1e-13 * (x @ x)


def test_divergence_form_matches_oracle(tiny):
    rng = np.random.default_rng(34)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    fb = assemble_fluid_forms(lay, cache, PARAMS, st["u"])
    u = rng.normal(size=lay.n_velocity_dofs)
    q = rng.normal(size=lay.n_fluid_q1)

    from fpsi.kinematics import PlateGeometryEval, transformed_fluid_gradient

    grid = lay.fluid
    hx, hy, hz = grid.spacing
    nq, wq = _gauss01(4)
    uf = _NodalField(grid, _split(u, lay.n_fluid_q2), 2)
    qf = _NodalField(grid, [q], 1)
    wpl = _PlateField(lay, st["omega"])
    _, _, zs = grid.axis_nodes()
    oracle = 0.0
    for ei in range(grid.cells_x):
        for ej in range(grid.cells_y):
            for ek in range(grid.cells_z):
                for a, wa in zip(nq, wq):
                    for b, wb in zip(nq, wq):
                        px, py = (ei + a) * hx, (ej + b) * hy
                        pw = wpl.eval(px, py)
                        geom = PlateGeometryEval(pw[0], pw[1], pw[2])
                        jac = 1.0 + pw[0] / tiny.R
                        for c, wc in zip(nq, wq):
                            pz = zs[0] + (ek + c) * hz
                            w = wa * wb * wc * hx * hy * hz
                            vu, gu = uf.eval(px, py, pz)
                            vq, _ = qf.eval(px, py, pz)
                            div = sum(
                                transformed_fluid_gradient(
                                    geom, np.array([px, py, pz]), gu[i], tiny.R
                                )[i]
                                for i in range(3)
                            )
                            oracle += w * jac * div * vq[0]
    val = float(q @ (fb.divergence @ u))
    assert abs(val - oracle) <= 1e-11 * max(1.0, abs(oracle))


def test_interface_forms_match_oracle(tiny):
    rng = np.random.default_rng(35)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    ib = assemble_interface_forms(lay, cache, PARAMS, st["u"])
    nb = lay.n_biot_q1
    n2 = lay.n_fluid_q2
    u = rng.normal(size=3 * n2)
    v = rng.normal(size=3 * n2)
    xi = rng.normal(size=3 * nb)
    psi = rng.normal(size=3 * nb)
    r = rng.normal(size=nb)
    p = rng.normal(size=nb)

    grid = lay.plate
    hx, hy = grid.spacing
    nq, wq = _gauss01(4)
    uf = _NodalField(lay.fluid, _split(u, n2), 2)
    vf = _NodalField(lay.fluid, _split(v, n2), 2)
    unf = _NodalField(lay.fluid, _split(st["u"], n2), 2)
    xif = _NodalField(lay.biot, _split(xi, nb), 1)
    psif = _NodalField(lay.biot, _split(psi, nb), 1)
    rf = _NodalField(lay.biot, [r], 1)
    pf = _NodalField(lay.biot, [p], 1)
    smf = _NodalField(lay.biot, _split(eta_s, nb), 1)
    wpl = _PlateField(lay, st["omega"])

    o = {"bern": 0.0, "stab": 0.0, "bjs": 0.0, "flux": 0.0, "exchange": 0.0}
    for ei in range(grid.cells_x):
        for ej in range(grid.cells_y):
            for a, wa in zip(nq, wq):
                for b, wb in zip(nq, wq):
                    px, py = (ei + a) * hx, (ej + b) * hy
                    w = wa * wb * hx * hy
                    pw = wpl.eval(px, py)
                    nrm = np.array([-pw[1], -pw[2], 1.0])
                    jg = np.sqrt(1 + pw[1] ** 2 + pw[2] ** 2)
                    t1 = np.array([1.0, 0.0, pw[1]]) / np.sqrt(1 + pw[1] ** 2)
                    t2 = np.array([0.0, 1.0, pw[2]]) / np.sqrt(1 + pw[2] ** 2)
                    vu, _ = uf.eval(px, py, 0.0)
                    vv, _ = vf.eval(px, py, 0.0)
                    vun, _ = unf.eval(px, py, 0.0)
                    vxi, _ = xif.eval(px, py, 0.0)
                    vpsi, _ = psif.eval(px, py, 0.0)
                    vr, _ = rf.eval(px, py, 0.0)
                    vp, _ = pf.eval(px, py, 0.0)
                    _, gsm = smf.eval(px, py, 1e-12)
                    nd = np.array([-gsm[2][0], -gsm[2][1], 1.0])
                    o["bern"] += w * (0.5 * vu @ vun - vp[0]) * (vpsi - vv) @ nrm
                    o["stab"] += 0.5 * w * ((vu - vxi) @ nrm) * (vun @ vv)
                    o["bjs"] += PARAMS.beta * w * jg * (
                        ((vxi - vu) @ t1) * ((vpsi - vv) @ t1)
                        + ((vxi - vu) @ t2) * ((vpsi - vv) @ t2)
                    )
                    o["flux"] += w * (vxi @ nd) * vr[0]
                    o["exchange"] += -w * ((vu - vxi) @ nrm) * vr[0]

    bern = (
        float(v @ (ib.uu @ u)) + float(psi @ (ib.xiu @ u))
        + float(v @ (ib.up @ p)) + float(psi @ (ib.xip @ p))
    )
    # remove the stabilization and slip parts that also live in uu/uxi blocks
    stab = float(v @ (ib.uu @ u)) + float(v @ (ib.uxi @ xi))
    # Validate combined row actions instead: full fluid-row and psi-row values
    fluid_row = (
        float(v @ (ib.uu @ u)) + float(v @ (ib.uxi @ xi)) + float(v @ (ib.up @ p))
    )
    psi_row = (
        float(psi @ (ib.xiu @ u)) + float(psi @ (ib.xixi @ xi)) + float(psi @ (ib.xip @ p))
    )
    p_row = float(r @ (ib.pu @ u)) + float(r @ (ib.pxi @ xi))
    flux_val = float(r @ (ib.pressure_flux @ xi))

    # Oracle for the same combined quantities
    o_fluid_row = 0.0
    o_psi_row = 0.0
    for ei in range(grid.cells_x):
        for ej in range(grid.cells_y):
            for a, wa in zip(nq, wq):
                for b, wb in zip(nq, wq):
                    px, py = (ei + a) * hx, (ej + b) * hy
                    w = wa * wb * hx * hy
                    pw = wpl.eval(px, py)
                    nrm = np.array([-pw[1], -pw[2], 1.0])
                    jg = np.sqrt(1 + pw[1] ** 2 + pw[2] ** 2)
                    t1 = np.array([1.0, 0.0, pw[1]]) / np.sqrt(1 + pw[1] ** 2)
                    t2 = np.array([0.0, 1.0, pw[2]]) / np.sqrt(1 + pw[2] ** 2)
                    vu, _ = uf.eval(px, py, 0.0)
                    vv, _ = vf.eval(px, py, 0.0)
                    vun, _ = unf.eval(px, py, 0.0)
                    vxi, _ = xif.eval(px, py, 0.0)
                    vpsi, _ = psif.eval(px, py, 0.0)
                    vp, _ = pf.eval(px, py, 0.0)
                    bern_v = (0.5 * vu @ vun - vp[0]) * (-(vv @ nrm))
                    bern_psi = (0.5 * vu @ vun - vp[0]) * (vpsi @ nrm)
                    stab_v = 0.5 * ((vu - vxi) @ nrm) * (vun @ vv)
                    bjs_v = PARAMS.beta * jg * (
                        ((vxi - vu) @ t1) * (-(vv @ t1)) + ((vxi - vu) @ t2) * (-(vv @ t2))
                    )
                    bjs_psi = PARAMS.beta * jg * (
                        ((vxi - vu) @ t1) * (vpsi @ t1) + ((vxi - vu) @ t2) * (vpsi @ t2)
                    )
                    o_fluid_row += w * (bern_v + stab_v + bjs_v)
                    o_psi_row += w * (bern_psi + bjs_psi)

    scale = max(1.0, abs(o_fluid_row), abs(o_psi_row), abs(o["exchange"]), abs(o["flux"]))
    assert abs(fluid_row - o_fluid_row) <= 1e-12 * scale
    assert abs(psi_row - o_psi_row) <= 1e-12 * scale
    assert abs(p_row - o["exchange"]) <= 1e-12 * scale
    assert abs(flux_val - o["flux"]) <= 1e-12 * scale


def test_bjs_semidefinite_in_relative_velocity(tiny):
    rng = np.random.default_rng(36)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    ib = assemble_interface_forms(lay, cache, PARAMS, np.zeros(lay.n_velocity_dofs))
    # with u_old = 0 the uu block is pure slip friction, PSD in u
    for _ in range(5):
        x = rng.normal(size=lay.n_velocity_dofs)
        assert float(x @ (ib.uu @ x)) >= -1e-12
        y = rng.normal(size=lay.n_displacement_dofs)
        assert float(y @ (ib.xixi @ y)) >= -1e-12


def test_biot_forms_match_oracle_and_flat_limits(tiny):
    rng = np.random.default_rng(37)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    bb = assemble_biot_forms(lay, cache)
    nb = lay.n_biot_q1
    psi = rng.normal(size=3 * nb)
    xi = rng.normal(size=3 * nb)
    p = rng.normal(size=nb)
    r = rng.normal(size=nb)

    grid = lay.biot
    hx, hy, hz = grid.spacing
    nq, wq = _gauss01(3)
    psif = _NodalField(grid, _split(psi, nb), 1)
    xif = _NodalField(grid, _split(xi, nb), 1)
    pf = _NodalField(grid, [p], 1)
    rf = _NodalField(grid, [r], 1)
    smf = _NodalField(grid, _split(eta_s, nb), 1)
    oV = oW = oD = 0.0
    for ei in range(grid.cells_x):
        for ej in range(grid.cells_y):
            for ek in range(grid.cells_z):
                for a, wa in zip(nq, wq):
                    for b, wb in zip(nq, wq):
                        for c, wc in zip(nq, wq):
                            x, y, z = (ei + a) * hx, (ej + b) * hy, (ek + c) * hz
                            w = wa * wb * wc * hx * hy * hz
                            _, gs = smf.eval(x, y, z)
                            A = np.eye(3) + gs
                            Ainv = np.linalg.inv(A)
                            J = np.linalg.det(A)
                            _, gpsi = psif.eval(x, y, z)
                            vxi, _ = xif.eval(x, y, z)
                            vp, _ = pf.eval(x, y, z)
                            vr, gr = rf.eval(x, y, z)
                            oV += w * J * vp[0] * np.trace(gpsi @ Ainv)
                            oW += w * J * vxi @ (gr[0] @ Ainv)
                            tp = gr[0] @ Ainv
                            _, gp2 = pf.eval(x, y, z)
                            oD += w * J * (gp2[0] @ Ainv) @ tp
    assert abs(float(psi @ (bb.coupling_disp_rows @ p)) - oV) <= 1e-12 * max(1.0, abs(oV))
    assert abs(float(r @ (bb.coupling_pressure_rows @ xi)) - oW) <= 1e-12 * max(1.0, abs(oW))
    assert abs(float(r @ (bb.darcy @ p)) - oD) <= 1e-12 * max(1.0, abs(oD))

    # flat smoothed geometry: filtration form equals the standard stiffness
    flat_cache = build_geometry_cache(
        lay, np.zeros(lay.n_plate_dofs), np.zeros(lay.n_plate_dofs),
        np.zeros(lay.n_displacement_dofs),
    )
    bb_flat = assemble_biot_forms(lay, flat_cache)
    from fpsi.elements import volume_table

    bt = volume_table(grid, 1, 3)
    conn = grid.cell_connectivity(1)
    loc = np.einsum("q,qak,qbk->ba", bt.weights, bt.grad, bt.grad)
    stiff = sp.coo_matrix(
        (
            np.tile(loc.ravel(), conn.shape[0]),
            (
                np.repeat(conn, conn.shape[1], axis=1).ravel(),
                np.tile(conn, (1, conn.shape[1])).ravel(),
            ),
        ),
        shape=(nb, nb),
    ).tocsr()
    diff = (bb_flat.darcy - stiff).tocoo()
    assert diff.nnz == 0 or np.abs(diff.data).max() <= 1e-13


def test_alpha_coupling_blocks_are_sign_transposes(tiny):
    """Volume + interface pressure-coupling rows equal minus the transpose of
    the displacement rows on the constrained subspace (discrete divergence
    theorem with exactly integrated polynomial integrands)."""
    rng = np.random.default_rng(38)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    lay = tiny.layout
    bb = assemble_biot_forms(lay, cache)
    ib = assemble_interface_forms(lay, cache, PARAMS, st["u"])
    total = bb.coupling_pressure_rows + ib.pressure_flux + bb.coupling_disp_rows.T
    xi_free = ~lay.displacement_mask
    p_free = ~lay.pressure_mask
    sub = total[np.ix_(np.flatnonzero(p_free), np.flatnonzero(xi_free))]
    scale = max(np.abs(bb.coupling_disp_rows.data).max(), 1.0)
    assert np.abs(sub.toarray()).max() <= 1e-12 * scale


def test_darcy_dissipation_scales_with_permeability(tiny):
    rng = np.random.default_rng(39)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    bb = assemble_biot_forms(tiny.layout, cache)
    p = rng.normal(size=tiny.layout.n_biot_q1)
    base = float(p @ (bb.darcy @ p))
    assert base >= 0.0
    prev = 0.0
    for kappa in (0.1, 1.0, 10.0, 1000.0):
        val = kappa * base
        assert val >= prev
        prev = val


def test_energy_identity_random_states(tiny, small):
    for problem, seed in ((tiny, 41), (small, 42)):
        rng = np.random.default_rng(seed)
        st, half, eta_s, cache, _ = make_step_context(problem, rng)
        fs, bs, zeta_new, rep = fluid_biot_step(
            problem.layout, problem.static, problem.plate_ops, PARAMS, 0.05, cache,
            FluidState(st["u"], np.zeros(problem.layout.n_fluid_q1)),
            BiotState(st["eta"], st["xi"], st["p"]),
            half.zeta, half.omega,
        )
        assert rep.identity_residual <= 1e-8
        assert rep.divergence_residual <= 1e-10
        assert abs(rep.convection_energy) <= 1e-13 * max(1.0, fs.velocity @ fs.velocity)
        # committed-state invariants
        lay = problem.layout
        assert np.array_equal(bs.displacement, st["eta"] + 0.05 * bs.velocity)
        gz = lay.displacement_gamma_z_dofs()
        free = ~lay.displacement_mask[gz]
        assert np.array_equal(
            bs.velocity[gz[free]], lay.transfer.apply(zeta_new)[free]
        )
        nb = lay.n_biot_q1
        assert np.abs(bs.velocity[gz[~free]]).max() == 0.0  # tangential masked


def test_all_dissipation_components_nonnegative(tiny):
    rng = np.random.default_rng(43)
    st, half, eta_s, cache, _ = make_step_context(tiny, rng)
    _, _, _, rep = fluid_biot_step(
        tiny.layout, tiny.static, tiny.plate_ops, PARAMS, 0.05, cache,
        FluidState(st["u"], np.zeros(tiny.layout.n_fluid_q1)),
        BiotState(st["eta"], st["xi"], st["p"]),
        half.zeta, half.omega,
    )
    assert rep.diss_viscous >= 0
    assert rep.diss_viscoelastic_shear >= 0
    assert rep.diss_viscoelastic_bulk >= 0
    assert rep.diss_darcy >= 0
    assert rep.diss_bjs >= 0


def test_purely_elastic_case_drops_viscoelastic_terms(tiny):
    rng = np.random.default_rng(44)
    params = PhysicsParams(
        rho_b=1.2, c0=0.8, alpha=0.9, kappa=1.5, mu_e=1.1, lambda_e=0.7,
        mu_v=0.0, lambda_v=0.0, rho_p=1.4, nu=0.6, beta=0.5,
    )
    st, half, eta_s, cache, _ = make_step_context(tiny, rng, params=params)
    _, _, _, rep = fluid_biot_step(
        tiny.layout, tiny.static, tiny.plate_ops, params, 0.05, cache,
        FluidState(st["u"], np.zeros(tiny.layout.n_fluid_q1)),
        BiotState(st["eta"], st["xi"], st["p"]),
        half.zeta, half.omega,
    )
    assert rep.diss_viscoelastic_shear == 0.0
    assert rep.diss_viscoelastic_bulk == 0.0
    assert rep.identity_residual <= 1e-8


def test_zero_state_stays_zero(tiny):
    lay = tiny.layout
    zero_pl = np.zeros(lay.n_plate_dofs)
    cache = build_geometry_cache(lay, zero_pl, zero_pl, np.zeros(lay.n_displacement_dofs))
    fs, bs, zeta_new, rep = fluid_biot_step(
        lay, tiny.static, tiny.plate_ops, PARAMS, 0.1, cache,
        FluidState(np.zeros(lay.n_velocity_dofs), np.zeros(lay.n_fluid_q1)),
        BiotState(
            np.zeros(lay.n_displacement_dofs),
            np.zeros(lay.n_displacement_dofs),
            np.zeros(lay.n_biot_q1),
        ),
        zero_pl, zero_pl,
    )
    assert np.abs(fs.velocity).max() <= 1e-14
    assert np.abs(bs.pressure).max() <= 1e-14
    assert rep.identity_lhs == rep.identity_rhs == 0.0


def test_symmetric_part_positive_definite_on_constrained_space(tiny):
    """With a zero lagged state the rescaled system's symmetric part is PD on
    the kernel of the divergence constraint."""
    lay = tiny.layout
    zero_pl = np.zeros(lay.n_plate_dofs)
    cache = build_geometry_cache(lay, zero_pl, zero_pl, np.zeros(lay.n_displacement_dofs))
    dt = 0.05
    asm = assemble_full_system(
        lay, tiny.static, tiny.plate_ops, PARAMS, dt, cache,
        np.zeros(lay.n_velocity_dofs), np.zeros(lay.n_displacement_dofs),
        np.zeros(lay.n_displacement_dofs), np.zeros(lay.n_biot_q1),
        zero_pl, zero_pl,
    )
    P, spaces = build_prolongation(lay)
    S = sp.diags(asm.scaling)
    A = (P.T @ (S @ asm.matrix_full) @ P).toarray()
    nuf = int((~lay.velocity_mask).sum())
    npi = lay.n_fluid_q1
    # split: velocity+multiplier block vs the rest; constraint rows are the
    # multiplier rows
    B = A[nuf : nuf + npi, :nuf]
    from scipy.linalg import null_space

    Z = null_space(B)
    keep = np.concatenate([np.arange(nuf), np.arange(nuf + npi, A.shape[0])])
    A_nopi = A[np.ix_(keep, keep)]
    # basis of the full constrained space: velocity part in ker(B), others free
    n_rest = A.shape[0] - nuf - npi
    basis = np.zeros((A_nopi.shape[0], Z.shape[1] + n_rest))
    basis[:nuf, : Z.shape[1]] = Z
    basis[nuf:, Z.shape[1] :] = np.eye(n_rest)
    sym = basis.T @ (0.5 * (A_nopi + A_nopi.T)) @ basis
    vals = scipy.linalg.eigvalsh(sym)
    assert vals.min() > 0
