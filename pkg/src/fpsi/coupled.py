"""Coupled fluid / porous-layer substep: assembly, solve and energy audit.

One linear saddle-point solve per time step updates the fluid velocity and
its divergence multiplier, the porous velocity (the displacement is recovered
as ``eta_new = eta_old + dt * xi_new``), the pore pressure and the plate
velocity.  The interface geometry is frozen at the lagged plate displacement
and at the smoothed porous displacement of the previous step.

Unknown ordering in the full (unconstrained) product space:

    [u (vector Q2 fluid) | pi (Q1 fluid) | xi (vector Q1 porous)
     | zeta (Hermite plate) | p (Q1 porous)]

The kinematic interface constraint (normal porous-velocity trace equals the
plate velocity at shared nodes) is realized by a prolongation matrix applied
to trial and test space alike.  Because the two spaces coincide, testing the
solved system with its own solution telescopes into the discrete energy
identity with no consistency defect.  Two assembly choices keep the
telescoping exact in floating point:

* the convection form is antisymmetrized element-locally, so it cancels
  exactly when tested with the solution;
* with the volume Jacobian folded into the cofactor matrix, the
  pressure-coupling volume integrands are polynomials that the porous-grid
  quadrature integrates exactly, so the element-wise divergence theorem
  holds to roundoff and the three pressure-coupling terms annihilate each
  other when tested with the solution.

Element-local blocks follow the convention ``loc[e, b, a]`` with b the test
(row) index and a the trial (column) index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elements import volume_table
from .errors import SolveError
from .kinematics import GeometryCache
from .mesh import DofLayout
from .params import PhysicsParams
from .plate import PlateOperators


@dataclass
class FluidState:
    """Fluid velocity and divergence-multiplier coefficients."""

    velocity: np.ndarray
    multiplier: np.ndarray


@dataclass
class BiotState:
    """Porous displacement, velocity and pore-pressure coefficients."""

    displacement: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray


@dataclass(frozen=True)
class EnergySnapshot:
    """The seven stored-energy components of one time level."""

    fluid_kinetic: float
    biot_kinetic: float
    plate_kinetic: float
    pressure: float
    elastic_shear: float
    elastic_bulk: float
    plate_bending: float

    @property
    def total(self) -> float:
        return (
            self.fluid_kinetic
            + self.biot_kinetic
            + self.plate_kinetic
            + self.pressure
            + self.elastic_shear
            + self.elastic_bulk
            + self.plate_bending
        )


@dataclass(frozen=True)
class CoupledStepReport:
    """Both sides of the substep energy identity, fully itemized."""

    energy_new: EnergySnapshot
    energy_old: EnergySnapshot
    diss_viscous: float
    diss_viscoelastic_shear: float
    diss_viscoelastic_bulk: float
    diss_darcy: float
    diss_bjs: float
    numdiss_fluid: float
    numdiss_biot_velocity: float
    numdiss_plate_velocity: float
    numdiss_pressure: float
    numdiss_elastic_shear: float
    numdiss_elastic_bulk: float
    identity_lhs: float
    identity_rhs: float
    identity_residual: float
    divergence_residual: float
    solve_residual: float
    convection_energy: float

    @property
    def dissipation_total(self) -> float:
        return (
            self.diss_viscous
            + self.diss_viscoelastic_shear
            + self.diss_viscoelastic_bulk
            + self.diss_darcy
            + self.diss_bjs
        )

    @property
    def numdiss_total(self) -> float:
        return (
            self.numdiss_fluid
            + self.numdiss_biot_velocity
            + self.numdiss_plate_velocity
            + self.numdiss_pressure
            + self.numdiss_elastic_shear
            + self.numdiss_elastic_bulk
        )


# ---------------------------------------------------------------------------
# Assembly helpers


def _scatter(loc: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> sp.csr_matrix:
    """Accumulate element-local blocks loc[e, b, a] into a sparse matrix."""
    ne, nr, nc = loc.shape
    r = np.repeat(rows, nc, axis=1).ravel()
    c = np.tile(cols, (1, nr)).ravel()
    return sp.coo_matrix((np.ascontiguousarray(loc).ravel(), (r, c)), shape=shape).tocsr()


def _sum(mats):
    out = mats[0]
    for m in mats[1:]:
        out = out + m
    return out


# ---------------------------------------------------------------------------
# Static (geometry-independent) operators


@dataclass(frozen=True)
class StaticOperators:
    biot_mass: sp.csr_matrix  # scalar Q1 mass on the porous grid
    biot_mass_vec: sp.csr_matrix  # vector version, block diagonal
    biot_sym_grad: sp.csr_matrix  # int D(eta):D(psi) on the vector space
    biot_div_div: sp.csr_matrix  # int (div eta)(div psi)
    biot_grad_grad: sp.csr_matrix  # int grad(eta):grad(psi)
    fluid_mass_flat: sp.csr_matrix  # scalar Q2 mass (refinement norms)


def assemble_static_operators(
    layout: DofLayout, nq_biot: int = 3, nq_fluid: int = 4
) -> StaticOperators:
    biot = layout.biot
    bt = volume_table(biot, 1, nq_biot)
    conn = biot.cell_connectivity(1)
    n = layout.n_biot_q1
    ne, nl = conn.shape
    w, val, grad = bt.weights, bt.val, bt.grad

    mass_loc = np.einsum("q,qb,qa->ba", w, val, val)
    mass = _scatter(np.broadcast_to(mass_loc, (ne, nl, nl)), conn, conn, (n, n))
    mass_vec = sp.block_diag([mass, mass, mass]).tocsr()

    dot_loc = np.einsum("q,qak,qbk->ba", w, grad, grad)
    # cross[m, i, b, a] = sum_q w grad_a[m] grad_b[i]
    cross = np.einsum("q,qam,qbi->miba", w, grad, grad)

    def vec_assemble(block_of):
        parts = []
        for m in range(3):
            for i in range(3):
                blk = block_of(m, i)
                if blk is None:
                    continue
                parts.append(
                    _scatter(
                        np.broadcast_to(blk, (ne, nl, nl)),
                        m * n + conn,
                        i * n + conn,
                        (3 * n, 3 * n),
                    )
                )
        return _sum(parts)

    sym_grad = vec_assemble(lambda m, i: 0.5 * (float(m == i) * dot_loc + cross[m, i]))
    div_div = vec_assemble(lambda m, i: cross[i, m])
    grad_grad = vec_assemble(lambda m, i: dot_loc if m == i else None)

    ft = volume_table(layout.fluid, 2, nq_fluid)
    fconn = layout.fluid.cell_connectivity(2)
    n2 = layout.n_fluid_q2
    fmass_loc = np.einsum("q,qb,qa->ba", ft.weights, ft.val, ft.val)
    fmass = _scatter(
        np.broadcast_to(fmass_loc, (fconn.shape[0], *fmass_loc.shape)), fconn, fconn, (n2, n2)
    )
    return StaticOperators(mass, mass_vec, sym_grad, div_div, grad_grad, fmass)


# ---------------------------------------------------------------------------
# Geometry-dependent blocks (one set per time step)


@dataclass(frozen=True)
class FluidBlocks:
    mass_weighted: sp.csr_matrix  # scalar Q2 mass weighted by 1 + omega/R
    viscous: sp.csr_matrix  # vector form, includes the 2*nu factor
    convection: sp.csr_matrix  # vector form, antisymmetric by construction
    reaction: sp.csr_matrix  # vector form, (1/2R)-weighted by zeta_half
    divergence: sp.csr_matrix  # (n_pi, 3*n2), J-weighted transformed div


@dataclass(frozen=True)
class InterfaceBlocks:
    uu: sp.csr_matrix
    uxi: sp.csr_matrix
    up: sp.csr_matrix
    xiu: sp.csr_matrix
    xixi: sp.csr_matrix
    xip: sp.csr_matrix
    pu: sp.csr_matrix
    pxi: sp.csr_matrix
    pressure_flux: sp.csr_matrix  # rows p, cols xi: int (xi . n_smooth) r


@dataclass(frozen=True)
class BiotBlocks:
    coupling_disp_rows: sp.csr_matrix  # rows xi, cols p: int J r div_t(psi)
    coupling_pressure_rows: sp.csr_matrix  # rows p, cols xi: int J xi . grad_t r
    darcy: sp.csr_matrix  # scalar, J-weighted transformed stiffness


def fluid_jacobian_values(cache: GeometryCache, omega: np.ndarray) -> np.ndarray:
    """1 + omega/R at the cached fluid volume points, for given coefficients."""
    plate_conn = cache.interface.plate_conn
    nz = cache.fluid.zhat.shape[0] // plate_conn.shape[0]
    col_of = np.repeat(np.arange(plate_conn.shape[0]), nz)
    vals = np.einsum("el,ql->eq", omega[plate_conn], cache.plate_xy_table.val)
    return 1.0 + vals[col_of] / cache.R


def weighted_fluid_mass(layout: DofLayout, cache: GeometryCache, weight: np.ndarray) -> sp.csr_matrix:
    """Scalar Q2 mass with an arbitrary per-quadrature-point weight."""
    vt = cache.fluid.table
    n2 = layout.n_fluid_q2
    loc = np.einsum("q,eq,qb,qa->eba", vt.weights, weight, vt.val, vt.val)
    return _scatter(loc, cache.fluid.conn, cache.fluid.conn, (n2, n2))


def _fluid_values_at_points(layout: DofLayout, cache: GeometryCache, u: np.ndarray) -> np.ndarray:
    vt = cache.fluid.table
    conn = cache.fluid.conn
    n2 = layout.n_fluid_q2
    out = np.empty(cache.fluid.zhat.shape + (3,))
    for c in range(3):
        out[..., c] = np.einsum("el,ql->eq", u[c * n2 : (c + 1) * n2][conn], vt.val)
    return out


def assemble_fluid_forms(
    layout: DofLayout,
    cache: GeometryCache,
    params: PhysicsParams,
    u_old: np.ndarray,
    nq_fluid: int = 4,
) -> FluidBlocks:
    """Volume forms of the fluid equation with lagged geometry and advection."""
    R = cache.R
    n2 = layout.n_fluid_q2
    n1f = layout.n_fluid_q1
    fl = cache.fluid
    vt = fl.table
    w = vt.weights
    conn = fl.conn

    mass = weighted_fluid_mass(layout, cache, fl.jac)

    t = fl.tgrad
    tt = np.einsum("q,eq,eqak,eqbk->eba", w, fl.jac, t, t)
    cross = np.einsum("q,eq,eqam,eqbi->emiba", w, fl.jac, t, t)
    parts = []
    for m in range(3):
        for i in range(3):
            blk = params.nu * (float(m == i) * tt + cross[:, m, i])
            parts.append(_scatter(blk, m * n2 + conn, i * n2 + conn, (3 * n2, 3 * n2)))
    viscous = _sum(parts)

    a_field = _fluid_values_at_points(layout, cache, u_old)
    a_field[..., 2] -= fl.zeta_half * (R + fl.zhat) / R
    adott = np.einsum("eqk,eqak->eqa", a_field, t)
    n_loc = np.einsum("q,eq,eqa,qb->eba", w, fl.jac, adott, vt.val)
    c_loc = 0.5 * (n_loc - n_loc.transpose(0, 2, 1))
    convection = _sum(
        [_scatter(c_loc, m * n2 + conn, m * n2 + conn, (3 * n2, 3 * n2)) for m in range(3)]
    )

    r_loc = np.einsum("q,eq,qb,qa->eba", w, fl.zeta_half / (2.0 * R), vt.val, vt.val)
    reaction = _sum(
        [_scatter(r_loc, m * n2 + conn, m * n2 + conn, (3 * n2, 3 * n2)) for m in range(3)]
    )

    vt1 = volume_table(layout.fluid, 1, nq_fluid)
    div_parts = []
    for i in range(3):
        loc = np.einsum("q,eq,eqa,qb->eba", w, fl.jac, t[:, :, :, i], vt1.val)
        div_parts.append(_scatter(loc, fl.conn_q1, i * n2 + conn, (n1f, 3 * n2)))
    divergence = _sum(div_parts)

    return FluidBlocks(mass, viscous, convection, reaction, divergence)


def assemble_interface_forms(
    layout: DofLayout,
    cache: GeometryCache,
    params: PhysicsParams,
    u_old: np.ndarray,
) -> InterfaceBlocks:
    """All interface coupling blocks over the shared face rule."""
    n2 = layout.n_fluid_q2
    nb = layout.n_biot_q1
    ic = cache.interface
    wf = ic.weights
    fval = ic.fluid_trace
    bval = ic.biot_trace
    fc = ic.fluid_face_conn
    bc = ic.biot_face_conn
    nrm = ic.frame.normal
    jg = ic.frame.jacobian
    taus = (ic.frame.tau1, ic.frame.tau2)
    nd = ic.reg_normal

    unf = np.empty(nrm.shape)
    for c in range(3):
        unf[..., c] = np.einsum("el,ql->eq", u_old[c * n2 : (c + 1) * n2][fc], fval)

    shapes = {
        "uu": (3 * n2, 3 * n2),
        "uxi": (3 * n2, 3 * nb),
        "up": (3 * n2, nb),
        "xiu": (3 * nb, 3 * n2),
        "xixi": (3 * nb, 3 * nb),
        "xip": (3 * nb, nb),
        "pu": (nb, 3 * n2),
        "pxi": (nb, 3 * nb),
    }
    acc: dict[str, list] = {k: [] for k in shapes}

    def urows(m):
        return m * n2 + fc

    def xrows(m):
        return m * nb + bc

    # Interface pressure / kinetic term: (u.u_old/2 - p) (psi - v).n
    for m in range(3):
        for i in range(3):
            loc = np.einsum("q,qa,eq,qb,eq->eba", wf, fval, unf[..., i], fval, nrm[..., m])
            acc["uu"].append(_scatter(-0.5 * loc, urows(m), urows(i), shapes["uu"]))
            loc = np.einsum("q,qa,eq,qb,eq->eba", wf, fval, unf[..., i], bval, nrm[..., m])
            acc["xiu"].append(_scatter(0.5 * loc, xrows(m), urows(i), shapes["xiu"]))
        loc = np.einsum("q,qa,qb,eq->eba", wf, bval, fval, nrm[..., m])
        acc["up"].append(_scatter(loc, urows(m), bc, shapes["up"]))
        loc = np.einsum("q,qa,qb,eq->eba", wf, bval, bval, nrm[..., m])
        acc["xip"].append(_scatter(-loc, xrows(m), bc, shapes["xip"]))

    # Transport stabilization (1/2) int (u - xi).n (u_old . v)
    for m in range(3):
        for i in range(3):
            loc = np.einsum("q,qa,eq,eq,qb->eba", wf, fval, nrm[..., i], unf[..., m], fval)
            acc["uu"].append(_scatter(0.5 * loc, urows(m), urows(i), shapes["uu"]))
            loc = np.einsum("q,qa,eq,eq,qb->eba", wf, bval, nrm[..., i], unf[..., m], fval)
            acc["uxi"].append(_scatter(-0.5 * loc, urows(m), xrows(i), shapes["uxi"]))

    # Slip friction: beta sum_tau int J_G (xi - u).tau (psi - v).tau
    if params.beta != 0.0:
        b = params.beta
        for tau in taus:
            for m in range(3):
                for i in range(3):
                    ff = np.einsum("q,eq,qa,eq,qb,eq->eba", wf, jg, fval, tau[..., i], fval, tau[..., m])
                    bb = np.einsum("q,eq,qa,eq,qb,eq->eba", wf, jg, bval, tau[..., i], bval, tau[..., m])
                    fb = np.einsum("q,eq,qa,eq,qb,eq->eba", wf, jg, fval, tau[..., i], bval, tau[..., m])
                    bf = np.einsum("q,eq,qa,eq,qb,eq->eba", wf, jg, bval, tau[..., i], fval, tau[..., m])
                    acc["uu"].append(_scatter(b * ff, urows(m), urows(i), shapes["uu"]))
                    acc["uxi"].append(_scatter(-b * bf, urows(m), xrows(i), shapes["uxi"]))
                    acc["xiu"].append(_scatter(-b * fb, xrows(m), urows(i), shapes["xiu"]))
                    acc["xixi"].append(_scatter(b * bb, xrows(m), xrows(i), shapes["xixi"]))

    # Mass exchange rows: -int ((u - xi).n) r
    for i in range(3):
        loc = np.einsum("q,qa,eq,qb->eba", wf, fval, nrm[..., i], bval)
        acc["pu"].append(_scatter(-loc, bc, urows(i), shapes["pu"]))
        loc = np.einsum("q,qa,eq,qb->eba", wf, bval, nrm[..., i], bval)
        acc["pxi"].append(_scatter(loc, bc, xrows(i), shapes["pxi"]))

    # Normal flux of the smoothed map against the pore pressure:
    # int (xi . n_smooth) r, to be scaled by -alpha in the system build.
    flux_parts = []
    for i in range(3):
        loc = np.einsum("q,qa,eq,qb->eba", wf, bval, nd[..., i], bval)
        flux_parts.append(_scatter(loc, bc, i * nb + bc, (nb, 3 * nb)))
    pressure_flux = _sum(flux_parts)

    def total(kind):
        return _sum(acc[kind]) if acc[kind] else sp.csr_matrix(shapes[kind])

    return InterfaceBlocks(
        total("uu"),
        total("uxi"),
        total("up"),
        total("xiu"),
        total("xixi"),
        total("xip"),
        total("pu"),
        total("pxi"),
        pressure_flux,
    )


def assemble_biot_forms(layout: DofLayout, cache: GeometryCache) -> BiotBlocks:
    """Transformed pressure-coupling and filtration forms on the porous box.

    The two coupling blocks are assembled from the same element-local array;
    together with the interface flux block they satisfy
    ``coupling_pressure_rows + pressure_flux = -coupling_disp_rows^T`` up to
    roundoff on the constrained space, which is the discrete form of the
    integration-by-parts identity behind the energy audit.
    """
    nb = layout.n_biot_q1
    bv = cache.biot
    bt = bv.table
    bw = bt.weights
    bconn = bv.conn

    # s[e,q,a,i] = grad_a . (J A^{-1} e_i) via the cofactor (polynomial).
    s = np.einsum("qak,eqik->eqai", bt.grad, bv.geom.cofactor)

    v_parts = []
    w_parts = []
    for i in range(3):
        loc = np.einsum("q,qa,eqb->eba", bw, bt.val, s[:, :, :, i])
        v_parts.append(_scatter(loc, i * nb + bconn, bconn, (3 * nb, nb)))
        w_parts.append(_scatter(loc, bconn, i * nb + bconn, (nb, 3 * nb)))
    coupling_disp = _sum(v_parts)
    coupling_pressure = _sum(w_parts)

    darcy_t = np.einsum("qak,eqki->eqai", bt.grad, bv.geom.inverse)
    loc = np.einsum("q,eq,eqak,eqbk->eba", bw, bv.geom.jacobian, darcy_t, darcy_t)
    darcy = _scatter(loc, bconn, bconn, (nb, nb))

    return BiotBlocks(coupling_disp, coupling_pressure, darcy)

# ---------------------------------------------------------------------------
# Constrained system build and solve


@dataclass(frozen=True)
class SpaceLayout:
    """Offsets of the five fields in the full product space."""

    n_u: int
    n_pi: int
    n_xi: int
    n_zeta: int
    n_p: int

    @property
    def off_u(self) -> int:
        return 0

    @property
    def off_pi(self) -> int:
        return self.n_u

    @property
    def off_xi(self) -> int:
        return self.n_u + self.n_pi

    @property
    def off_zeta(self) -> int:
        return self.n_u + self.n_pi + self.n_xi

    @property
    def off_p(self) -> int:
        return self.n_u + self.n_pi + self.n_xi + self.n_zeta

    @property
    def total(self) -> int:
        return self.n_u + self.n_pi + self.n_xi + self.n_zeta + self.n_p


def space_layout(layout: DofLayout) -> SpaceLayout:
    return SpaceLayout(
        layout.n_velocity_dofs,
        layout.n_fluid_q1,
        layout.n_displacement_dofs,
        layout.n_plate_dofs,
        layout.n_biot_q1,
    )


def build_prolongation(layout: DofLayout) -> tuple[sp.csr_matrix, SpaceLayout]:
    """Map reduced unknowns onto the full product space.

    The reduced vector stacks [u_free | pi | xi_free | zeta_free | p_free];
    interface normal-velocity DOFs of the porous grid are not independent
    unknowns but driven by the plate-velocity value DOFs, which realizes the
    kinematic constraint simultaneously in trial and test space.
    """
    spaces = space_layout(layout)
    rows, cols = [], []

    u_free = np.flatnonzero(~layout.velocity_mask)
    xi_mask = layout.displacement_mask.copy()
    gamma_z = layout.displacement_gamma_z_dofs()
    driven = gamma_z[~xi_mask[gamma_z]]
    driven_plate_dof = layout.transfer.plate_value_dofs[~xi_mask[gamma_z]]
    xi_free = np.flatnonzero(~xi_mask & ~np.isin(np.arange(spaces.n_xi), driven))
    zeta_free = np.flatnonzero(~layout.plate_mask)
    p_free = np.flatnonzero(~layout.pressure_mask)

    col = 0
    rows.append(spaces.off_u + u_free)
    cols.append(col + np.arange(u_free.size))
    col += u_free.size
    rows.append(spaces.off_pi + np.arange(spaces.n_pi))
    cols.append(col + np.arange(spaces.n_pi))
    col += spaces.n_pi
    rows.append(spaces.off_xi + xi_free)
    cols.append(col + np.arange(xi_free.size))
    col += xi_free.size
    zeta_col = {dof: col + k for k, dof in enumerate(zeta_free)}
    rows.append(spaces.off_zeta + zeta_free)
    cols.append(col + np.arange(zeta_free.size))
    col += zeta_free.size
    # driven interface DOFs: xi_z(node) = zeta value DOF
    rows.append(spaces.off_xi + driven)
    cols.append(np.array([zeta_col[d] for d in driven_plate_dof], dtype=np.int64))
    rows.append(spaces.off_p + p_free)
    cols.append(col + np.arange(p_free.size))
    col += p_free.size

    data = np.ones(sum(r.size for r in rows))
    P = sp.coo_matrix(
        (data, (np.concatenate(rows), np.concatenate(cols))), shape=(spaces.total, col)
    ).tocsr()
    return P, spaces


@dataclass(frozen=True)
class AssembledStep:
    """Everything the solve and the audit need for one coupled substep."""

    matrix_full: sp.csr_matrix
    rhs_full: np.ndarray
    scaling: np.ndarray
    fluid_blocks: FluidBlocks
    interface_blocks: InterfaceBlocks
    biot_blocks: BiotBlocks
    mass_new: sp.csr_matrix


def assemble_full_system(
    layout: DofLayout,
    static: StaticOperators,
    plate_ops: PlateOperators,
    params: PhysicsParams,
    dt: float,
    cache: GeometryCache,
    u_old: np.ndarray,
    xi_old: np.ndarray,
    eta_old: np.ndarray,
    p_old: np.ndarray,
    zeta_half: np.ndarray,
    omega_half: np.ndarray,
) -> AssembledStep:
    spaces = space_layout(layout)
    fb = assemble_fluid_forms(layout, cache, params, u_old)
    ib = assemble_interface_forms(layout, cache, params, u_old)
    bb = assemble_biot_forms(layout, cache)
    mass_new = weighted_fluid_mass(layout, cache, fluid_jacobian_values(cache, omega_half))

    n2 = layout.n_fluid_q2
    a = params.alpha

    def vec3(scalar_mat):
        return sp.block_diag([scalar_mat] * 3).tocsr()

    fluid_mass_vec = vec3(fb.mass_weighted)

    A_uu = (1.0 / dt) * fluid_mass_vec + fb.viscous + fb.convection + fb.reaction + ib.uu
    A_uxi = ib.uxi
    A_up = ib.up
    A_upi = fb.divergence.T
    A_xiu = ib.xiu
    A_xixi = (
        (params.rho_b / dt) * static.biot_mass_vec
        + (dt * 2.0 * params.mu_e + 2.0 * params.mu_v) * static.biot_sym_grad
        + (dt * params.lambda_e + params.lambda_v) * static.biot_div_div
        + ib.xixi
    )
    A_xip = ib.xip + (-a) * bb.coupling_disp_rows
    A_zz = (params.rho_p / dt) * plate_ops.mass
    A_pu = ib.pu
    A_pxi = ib.pxi + (-a) * (bb.coupling_pressure_rows + ib.pressure_flux)
    A_pp = (params.c0 / dt) * static.biot_mass + params.kappa * bb.darcy

    blocks = [
        [A_uu, A_upi, A_uxi, None, A_up],
        [fb.divergence, None, None, None, None],
        [A_xiu, None, A_xixi, None, A_xip],
        [None, None, None, A_zz, None],
        [A_pu, None, A_pxi, None, A_pp],
    ]
    A_full = sp.bmat(blocks, format="csr")

    rhs = np.zeros(spaces.total)
    rhs[spaces.off_u : spaces.off_pi] = (1.0 / dt) * (fluid_mass_vec @ u_old)
    rhs[spaces.off_xi : spaces.off_zeta] = (params.rho_b / dt) * (
        static.biot_mass_vec @ xi_old
    ) - (2.0 * params.mu_e * static.biot_sym_grad + params.lambda_e * static.biot_div_div) @ eta_old
    rhs[spaces.off_zeta : spaces.off_p] = (params.rho_p / dt) * (plate_ops.mass @ zeta_half)
    rhs[spaces.off_p :] = (params.c0 / dt) * (static.biot_mass @ p_old)

    # Test rescaling: fluid momentum, divergence constraint and pressure rows
    # are multiplied by dt to balance the hyperbolic and parabolic scalings.
    scaling = np.ones(spaces.total)
    scaling[spaces.off_u : spaces.off_xi] = dt
    scaling[spaces.off_p :] = dt

    return AssembledStep(A_full, rhs, scaling, fb, ib, bb, mass_new)


def _quad_form(M: sp.csr_matrix, x: np.ndarray, y: np.ndarray | None = None) -> float:
    return float(x @ (M @ (x if y is None else y)))


def fluid_biot_step(
    layout: DofLayout,
    static: StaticOperators,
    plate_ops: PlateOperators,
    params: PhysicsParams,
    dt: float,
    cache: GeometryCache,
    fluid_old: FluidState,
    biot_old: BiotState,
    zeta_half: np.ndarray,
    omega_half: np.ndarray,
    linear_tol: float = 1e-12,
) -> tuple[FluidState, BiotState, np.ndarray, CoupledStepReport]:
    """Solve one coupled substep and audit its energy balance.

    ``zeta_half`` and ``omega_half`` are the plate velocity and displacement
    produced by the preceding plate substep; the cache must have been built
    from the lagged plate displacement and the smoothed porous displacement.
    """
    asm = assemble_full_system(
        layout,
        static,
        plate_ops,
        params,
        dt,
        cache,
        fluid_old.velocity,
        biot_old.velocity,
        biot_old.displacement,
        biot_old.pressure,
        zeta_half,
        omega_half,
    )
    P, spaces = build_prolongation(layout)
    S = sp.diags(asm.scaling)
    A_red = (P.T @ (S @ asm.matrix_full) @ P).tocsc()
    b_red = P.T @ (asm.scaling * asm.rhs_full)

    try:
        x_red = spla.spsolve(A_red, b_red)
    except Exception as exc:  # pragma: no cover - scipy raises various types
        raise SolveError(f"coupled solve failed: {exc}") from exc
    if not np.all(np.isfinite(x_red)):
        raise SolveError("coupled solve produced non-finite values")
    res = np.linalg.norm(A_red @ x_red - b_red)
    scale = np.linalg.norm(b_red)
    solve_residual = res / max(scale, 1e-30)
    if solve_residual > max(1e-6, linear_tol * 1e4):
        raise SolveError(f"coupled solve residual {solve_residual:.3e} too large")

    x_full = P @ x_red
    u_new = x_full[spaces.off_u : spaces.off_pi]
    pi_new = x_full[spaces.off_pi : spaces.off_xi]
    xi_new = x_full[spaces.off_xi : spaces.off_zeta]
    zeta_new = x_full[spaces.off_zeta : spaces.off_p]
    p_new = x_full[spaces.off_p :]
    eta_new = biot_old.displacement + dt * xi_new

    div_residual = float(np.abs(asm.fluid_blocks.divergence @ u_new).max())

    report = _energy_report(
        layout,
        static,
        plate_ops,
        params,
        dt,
        cache,
        asm,
        fluid_old,
        biot_old,
        zeta_half,
        omega_half,
        u_new,
        xi_new,
        eta_new,
        p_new,
        zeta_new,
        div_residual,
        solve_residual,
    )
    return (
        FluidState(u_new, pi_new),
        BiotState(eta_new, xi_new, p_new),
        zeta_new,
        report,
    )


def _interface_slip_dissipation(
    layout: DofLayout,
    cache: GeometryCache,
    params: PhysicsParams,
    u: np.ndarray,
    xi: np.ndarray,
) -> float:
    """beta * sum_tau int J_G |(xi - u).tau|^2 from the cached face data."""
    if params.beta == 0.0:
        return 0.0
    ic = cache.interface
    n2 = layout.n_fluid_q2
    nb = layout.n_biot_q1
    rel = np.empty(ic.frame.jacobian.shape + (3,))
    for c in range(3):
        rel[..., c] = np.einsum(
            "el,ql->eq", xi[c * nb : (c + 1) * nb][ic.biot_face_conn], ic.biot_trace
        ) - np.einsum("el,ql->eq", u[c * n2 : (c + 1) * n2][ic.fluid_face_conn], ic.fluid_trace)
    total = 0.0
    for tau in (ic.frame.tau1, ic.frame.tau2):
        proj = np.einsum("eqc,eqc->eq", rel, tau)
        total += float(np.einsum("q,eq,eq->", ic.weights, ic.frame.jacobian, proj**2))
    return params.beta * total


def _energy_report(
    layout,
    static,
    plate_ops,
    params,
    dt,
    cache,
    asm,
    fluid_old,
    biot_old,
    zeta_half,
    omega_half,
    u_new,
    xi_new,
    eta_new,
    p_new,
    zeta_new,
    div_residual,
    solve_residual,
) -> CoupledStepReport:
    mass_old_vec = sp.block_diag([asm.fluid_blocks.mass_weighted] * 3).tocsr()
    mass_new_vec = sp.block_diag([asm.mass_new] * 3).tocsr()

    def snapshot(u, mass_vec, xi, zeta, p, eta) -> EnergySnapshot:
        return EnergySnapshot(
            fluid_kinetic=0.5 * _quad_form(mass_vec, u),
            biot_kinetic=0.5 * params.rho_b * _quad_form(static.biot_mass_vec, xi),
            plate_kinetic=0.5 * params.rho_p * _quad_form(plate_ops.mass, zeta),
            pressure=0.5 * params.c0 * _quad_form(static.biot_mass, p),
            elastic_shear=params.mu_e * _quad_form(static.biot_sym_grad, eta),
            elastic_bulk=0.5 * params.lambda_e * _quad_form(static.biot_div_div, eta),
            plate_bending=0.5 * _quad_form(plate_ops.bending, omega_half),
        )

    e_new = snapshot(u_new, mass_new_vec, xi_new, zeta_new, p_new, eta_new)
    e_old = snapshot(
        fluid_old.velocity, mass_old_vec, biot_old.velocity, zeta_half, biot_old.pressure,
        biot_old.displacement,
    )

    du = u_new - fluid_old.velocity
    dxi = xi_new - biot_old.velocity
    dzeta = zeta_new - zeta_half
    dp = p_new - biot_old.pressure
    deta = eta_new - biot_old.displacement

    diss_visc = dt * _quad_form(asm.fluid_blocks.viscous, u_new)
    diss_ve_shear = dt * 2.0 * params.mu_v * _quad_form(static.biot_sym_grad, xi_new)
    diss_ve_bulk = dt * params.lambda_v * _quad_form(static.biot_div_div, xi_new)
    diss_darcy = dt * params.kappa * _quad_form(asm.biot_blocks.darcy, p_new)
    diss_bjs = dt * _interface_slip_dissipation(layout, cache, params, u_new, xi_new)

    nd_fluid = 0.5 * _quad_form(mass_old_vec, du)
    nd_xi = 0.5 * params.rho_b * _quad_form(static.biot_mass_vec, dxi)
    nd_zeta = 0.5 * params.rho_p * _quad_form(plate_ops.mass, dzeta)
    nd_p = 0.5 * params.c0 * _quad_form(static.biot_mass, dp)
    nd_eshear = params.mu_e * _quad_form(static.biot_sym_grad, deta)
    nd_ebulk = 0.5 * params.lambda_e * _quad_form(static.biot_div_div, deta)

    lhs = (
        e_new.total
        + diss_visc
        + diss_ve_shear
        + diss_ve_bulk
        + diss_darcy
        + diss_bjs
        + nd_fluid
        + nd_xi
        + nd_zeta
        + nd_p
        + nd_eshear
        + nd_ebulk
    )
    rhs = e_old.total
    residual = abs(lhs - rhs) / max(abs(rhs), 1e-30)

    conv_energy = _quad_form(asm.fluid_blocks.convection, u_new)

    return CoupledStepReport(
        energy_new=e_new,
        energy_old=e_old,
        diss_viscous=diss_visc,
        diss_viscoelastic_shear=diss_ve_shear,
        diss_viscoelastic_bulk=diss_ve_bulk,
        diss_darcy=diss_darcy,
        diss_bjs=diss_bjs,
        numdiss_fluid=nd_fluid,
        numdiss_biot_velocity=nd_xi,
        numdiss_plate_velocity=nd_zeta,
        numdiss_pressure=nd_p,
        numdiss_elastic_shear=nd_eshear,
        numdiss_elastic_bulk=nd_ebulk,
        identity_lhs=lhs,
        identity_rhs=rhs,
        identity_residual=residual,
        divergence_residual=div_residual,
        solve_residual=solve_residual,
        convection_energy=conv_energy,
    )
