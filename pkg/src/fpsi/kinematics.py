"""Maps between reference and physical configurations and their operators.

The fluid box is mapped by the vertical ALE stretch
``(x, y, z) -> (x, y, z + (1 + z/R) * w(x, y))`` driven by the plate
displacement ``w``; the porous box is mapped by identity plus displacement.
All differential operators of the moving-domain equations are realized here
as pointwise coefficient matrices on the fixed boxes, evaluated once per
quadrature point per time step and stored in a :class:`GeometryCache`.

Conventions: scaled interface normal ``n = (-dw/dx, -dw/dy, 1)`` (the surface
Jacobian is absorbed), unit tangents carry their normalization factors, and
the porous deformation gradient is ``A = I + grad(eta)`` with cofactor-based
inversion so that ``J * A^{-1}`` is exactly the cofactor transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import (
    PlateTable,
    VolumeTable,
    biot_bottom_face_connectivity,
    fluid_top_face_connectivity,
    gamma_face_tables,
    plate_table,
    volume_table,
)
from .errors import GeometryError
from .mesh import BoxGrid, DofLayout
from .quadrature import lagrange_q1

# ---------------------------------------------------------------------------
# Pointwise operations


@dataclass(frozen=True)
class PlateGeometryEval:
    """Plate displacement value and slopes at one or more points."""

    value: np.ndarray
    dx: np.ndarray
    dy: np.ndarray


@dataclass(frozen=True)
class InterfaceFrame:
    """Scaled normal, unit tangents and area Jacobian of the interface."""

    normal: np.ndarray  # (..., 3), scaled: (-wx, -wy, 1)
    tau1: np.ndarray  # (..., 3), unit
    tau2: np.ndarray  # (..., 3), unit
    jacobian: np.ndarray  # (...,), sqrt(1 + wx^2 + wy^2)


def ale_fluid_map(omega: float, R: float, point: np.ndarray) -> np.ndarray:
    """Reference fluid point -> physical point; the bottom z=-R is fixed."""
    point = np.asarray(point, dtype=float)
    out = point.copy()
    out[..., 2] = point[..., 2] + (1.0 + point[..., 2] / R) * omega
    return out


def ale_fluid_inverse(
    omega: float, R: float, point: np.ndarray, floor: float = 0.0
) -> np.ndarray:
    """Physical fluid point -> reference point.

    Raises GeometryError when 1 + omega/R <= floor (collapsed column).
    """
    if 1.0 + omega / R <= floor:
        raise GeometryError(f"degenerate fluid column: 1 + omega/R = {1.0 + omega / R}")
    point = np.asarray(point, dtype=float)
    out = point.copy()
    out[..., 2] = -R + R / (R + omega) * (R + point[..., 2])
    return out


def jacobian_fluid(omega, R: float):
    """Volume Jacobian of the ALE map, 1 + omega/R (no absolute value)."""
    return 1.0 + np.asarray(omega) / R


def interface_frame(wx, wy) -> InterfaceFrame:
    """Frame vectors from the plate slopes, vectorized over leading axes."""
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    one = np.ones_like(wx)
    zero = np.zeros_like(wx)
    normal = np.stack([-wx, -wy, one], axis=-1)
    n1 = np.sqrt(1.0 + wx**2)
    n2 = np.sqrt(1.0 + wy**2)
    tau1 = np.stack([one / n1, zero, wx / n1], axis=-1)
    tau2 = np.stack([zero, one / n2, wy / n2], axis=-1)
    jac = np.sqrt(1.0 + wx**2 + wy**2)
    return InterfaceFrame(normal, tau1, tau2, jac)


def transformed_fluid_gradient(
    plate: PlateGeometryEval,
    ref_point: np.ndarray,
    partials: np.ndarray,
    R: float,
    floor: float = 0.0,
) -> np.ndarray:
    """Apply the ALE-transformed gradient to reference partial derivatives.

    ``partials`` holds (dg/dx, dg/dy, dg/dz) on the reference box; the result
    is the physical gradient expressed at the reference point.
    """
    w, wx, wy = plate.value, plate.dx, plate.dy
    if np.any(1.0 + np.asarray(w) / R <= floor):
        raise GeometryError("degenerate fluid geometry in transformed gradient")
    ref_point = np.asarray(ref_point, dtype=float)
    partials = np.asarray(partials, dtype=float)
    zhat = ref_point[..., 2]
    z = zhat + (1.0 + zhat / R) * w
    factor = (R + z) * R / (R + w) ** 2
    return np.stack(
        [
            partials[..., 0] - factor * wx * partials[..., 2],
            partials[..., 1] - factor * wy * partials[..., 2],
            R / (R + w) * partials[..., 2],
        ],
        axis=-1,
    )


def transformed_biot_gradient(inv_deformation: np.ndarray, partials: np.ndarray) -> np.ndarray:
    """Row-vector product partials . (I + grad eta)^{-1}."""
    return np.einsum("...k,...ki->...i", np.asarray(partials), np.asarray(inv_deformation))


def domain_velocity(zeta, zhat, R: float) -> np.ndarray:
    """ALE domain velocity ((R + z)/R) * zeta * e3 on the fluid box."""
    zeta = np.asarray(zeta, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    w = (R + zhat) / R * zeta
    out = np.zeros(np.broadcast(zeta, zhat).shape + (3,))
    out[..., 2] = w
    return out


def deformation_eval(grad_eta: np.ndarray, floor: float = 0.0):
    """Deformation data from displacement gradients, vectorized.

    Returns (A, J, A_inv, cof) with A = I + grad_eta, J = det A, the cofactor
    matrix cof (so J * A^{-1} = cof^T exactly), raising GeometryError when
    J <= floor anywhere.
    """
    grad_eta = np.asarray(grad_eta, dtype=float)
    A = grad_eta + np.eye(3)
    cof = np.empty_like(A)
    for i in range(3):
        for j in range(3):
            i1, i2 = [a for a in range(3) if a != i]
            j1, j2 = [a for a in range(3) if a != j]
            cof[..., i, j] = (-1.0) ** (i + j) * (
                A[..., i1, j1] * A[..., i2, j2] - A[..., i1, j2] * A[..., i2, j1]
            )
    J = (
        A[..., 0, 0] * cof[..., 0, 0]
        + A[..., 0, 1] * cof[..., 0, 1]
        + A[..., 0, 2] * cof[..., 0, 2]
    )
    if np.any(J <= floor):
        raise GeometryError(f"deformation Jacobian fell to {np.min(J):.3e} (floor {floor})")
    A_inv = np.swapaxes(cof, -1, -2) / J[..., None, None]
    return A, J, A_inv, cof


@dataclass(frozen=True)
class BiotGeometryEval:
    """Deformation data of the porous medium at a set of points."""

    grad: np.ndarray  # (..., 3, 3)
    deformation: np.ndarray  # A = I + grad
    jacobian: np.ndarray  # det A
    inverse: np.ndarray  # A^{-1}
    cofactor: np.ndarray  # cof(A) = J * A^{-T}

    @classmethod
    def from_gradients(cls, grad_eta: np.ndarray, floor: float = 0.0) -> "BiotGeometryEval":
        A, J, Ainv, cof = deformation_eval(grad_eta, floor)
        return cls(np.asarray(grad_eta, dtype=float), A, J, Ainv, cof)

    def operator_norms(self) -> tuple[np.ndarray, np.ndarray]:
        """Spectral norms of A and A^{-1} per point."""
        sv = np.linalg.svd(self.deformation, compute_uv=False)
        return sv[..., 0], 1.0 / sv[..., -1]


# ---------------------------------------------------------------------------
# Per-step geometry caches


@dataclass(frozen=True)
class FluidVolumeCache:
    table: VolumeTable
    conn: np.ndarray  # (ne, 27) Q2
    conn_q1: np.ndarray  # (ne, 8) Q1 multiplier
    zhat: np.ndarray  # (ne, nq) reference z of the quadrature points
    omega: np.ndarray  # (ne, nq) plate displacement
    jac: np.ndarray  # (ne, nq) 1 + omega/R
    zeta_half: np.ndarray  # (ne, nq) plate velocity of the current half step
    tgrad: np.ndarray  # (ne, nq, 27, 3) transformed basis gradients


@dataclass(frozen=True)
class InterfaceCache:
    points_ref: np.ndarray  # (nqf, 2) face rule on the unit square
    weights: np.ndarray  # (nqf,)
    fluid_trace: np.ndarray  # (nqf, 9)
    biot_trace: np.ndarray  # (nqf, 4)
    fluid_face_conn: np.ndarray  # (ne2, 9)
    biot_face_conn: np.ndarray  # (ne2, 4)
    plate_conn: np.ndarray  # (ne2, 16)
    plate_val: np.ndarray  # (nqf, 16)
    frame: InterfaceFrame  # arrays shaped (ne2, nqf, ...)
    reg_normal: np.ndarray  # (ne2, nqf, 3) scaled normal of the smoothed map
    reg_trace_z: np.ndarray  # (ne2, nqf) smoothed displacement trace
    reg_trace_tan: np.ndarray  # (ne2, nqf) max |tangential smoothed trace|


@dataclass(frozen=True)
class BiotVolumeCache:
    table: VolumeTable
    conn: np.ndarray  # (ne, 8)
    geom: BiotGeometryEval  # arrays shaped (ne, nq, ...)


@dataclass(frozen=True)
class GeometryCache:
    """All per-quadrature-point geometry for one time step."""

    R: float
    fluid: FluidVolumeCache
    interface: InterfaceCache
    biot: BiotVolumeCache
    plate_xy_table: PlateTable  # plate basis at the fluid-volume xy points


def _plate_eval(
    table: PlateTable, conn: np.ndarray, coeffs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values and slopes of a plate field at tabulated points, per element."""
    local = coeffs[conn]  # (ne, 16)
    val = np.einsum("el,ql->eq", local, table.val)
    dx = np.einsum("el,ql->eq", local, table.grad[:, :, 0])
    dy = np.einsum("el,ql->eq", local, table.grad[:, :, 1])
    return val, dx, dy


def build_geometry_cache(
    layout: DofLayout,
    omega: np.ndarray,
    zeta_half: np.ndarray,
    eta_smooth: np.ndarray,
    *,
    nq_fluid: int = 4,
    nq_biot: int = 3,
    nq_face: int = 4,
    jac_floor: float = 0.0,
) -> GeometryCache:
    """Evaluate and store all geometric coefficient fields for one step.

    ``omega``/``zeta_half`` are plate coefficient vectors (lagged displacement
    and current half-step velocity), ``eta_smooth`` the mollified porous
    displacement as nodal values on the porous grid.  Raises GeometryError on
    non-positive Jacobians; threshold policy belongs to the monitors.
    """
    fluid_grid, biot_grid, plate = layout.fluid, layout.biot, layout.plate
    R = biot_grid.extent_z_hi

    # Fluid volume: plate fields vary only in (x, y); evaluate the plate basis
    # at the xy-projection of the volume rule and broadcast over z-columns.
    vt = volume_table(fluid_grid, 2, nq_fluid)
    conn = fluid_grid.cell_connectivity(2)
    conn_q1 = fluid_grid.cell_connectivity(1)
    plate_conn = plate.cell_connectivity()
    xy_tab = plate_table(plate, nq_fluid, points=vt.points_ref[:, :2])

    ne = conn.shape[0]
    ne2 = plate_conn.shape[0]
    nz = fluid_grid.cells_z
    # element e = ((ei*ny)+ej)*nz + ek -> plate element (ei*ny + ej)
    col_of = np.repeat(np.arange(ne2), nz)

    w_col, wx_col, wy_col = _plate_eval(xy_tab, plate_conn, omega)
    z_col, _, _ = _plate_eval(xy_tab, plate_conn, zeta_half)
    w = w_col[col_of]
    wx = wx_col[col_of]
    wy = wy_col[col_of]
    zh = z_col[col_of]

    _, _, zs = fluid_grid.axis_nodes()
    hz = fluid_grid.spacing[2]
    z_lo = zs[np.arange(ne) % nz]
    zhat = z_lo[:, None] + vt.points_ref[None, :, 2] * hz

    jac = jacobian_fluid(w, R)
    if np.any(jac <= jac_floor):
        raise GeometryError(f"fluid Jacobian fell to {jac.min():.3e}")

    # Transformed basis gradients t = M_w . grad(phi) with
    # M_w = [[1,0,cx],[0,1,cy],[0,0,b]] acting on reference partials.
    cx = -(R + zhat) * wx / (R + w)
    cy = -(R + zhat) * wy / (R + w)
    bz = R / (R + w)
    g = vt.grad  # (nq, 27, 3)
    tgrad = np.empty((ne, vt.val.shape[0], g.shape[1], 3))
    tgrad[:, :, :, 0] = g[None, :, :, 0] + cx[:, :, None] * g[None, :, :, 2]
    tgrad[:, :, :, 1] = g[None, :, :, 1] + cy[:, :, None] * g[None, :, :, 2]
    tgrad[:, :, :, 2] = bz[:, :, None] * g[None, :, :, 2]

    fluid_cache = FluidVolumeCache(vt, conn, conn_q1, zhat, w, jac, zh, tgrad)

    # Interface: shared rule for the plate frame, fluid trace and porous trace.
    pts2, wts2, ftrace, btrace = gamma_face_tables(fluid_grid, biot_grid, nq_face)
    p_tab = plate_table(plate, nq_face, points=pts2)
    wG, wxG, wyG = _plate_eval(p_tab, plate_conn, omega)
    frame = interface_frame(wxG, wyG)

    # Smoothed-map normal from the bilinear interface trace of eta_smooth.
    bconn = biot_bottom_face_connectivity(biot_grid)
    n_b = layout.n_biot_q1
    ez_trace = eta_smooth[2 * n_b : 3 * n_b]
    ex_trace = eta_smooth[0:n_b]
    ey_trace = eta_smooth[n_b : 2 * n_b]
    hx, hy, _ = biot_grid.spacing
    vx, dvx = lagrange_q1(pts2[:, 0])
    vy, dvy = lagrange_q1(pts2[:, 1])
    tr_val = np.empty((pts2.shape[0], 4))
    tr_dx = np.empty_like(tr_val)
    tr_dy = np.empty_like(tr_val)
    loc = 0
    for b in range(2):
        for a in range(2):
            tr_val[:, loc] = vx[:, a] * vy[:, b]
            tr_dx[:, loc] = dvx[:, a] * vy[:, b] / hx
            tr_dy[:, loc] = vx[:, a] * dvy[:, b] / hy
            loc += 1
    ez_loc = ez_trace[bconn]
    rz = np.einsum("el,ql->eq", ez_loc, tr_val)
    rzx = np.einsum("el,ql->eq", ez_loc, tr_dx)
    rzy = np.einsum("el,ql->eq", ez_loc, tr_dy)
    reg_normal = np.stack([-rzx, -rzy, np.ones_like(rz)], axis=-1)
    tan = np.maximum(
        np.abs(np.einsum("el,ql->eq", ex_trace[bconn], tr_val)),
        np.abs(np.einsum("el,ql->eq", ey_trace[bconn], tr_val)),
    )

    interface_cache = InterfaceCache(
        pts2,
        wts2,
        ftrace.val,
        btrace.val,
        fluid_top_face_connectivity(fluid_grid),
        bconn,
        plate_conn,
        p_tab.val,
        frame,
        reg_normal,
        rz,
        tan,
    )

    # Porous volume: deformation data of the smoothed map from the trilinear
    # interpolant of the smoothed nodal displacement.
    bt = volume_table(biot_grid, 1, nq_biot)
    bvol_conn = biot_grid.cell_connectivity(1)
    comps = [eta_smooth[c * n_b : (c + 1) * n_b][bvol_conn] for c in range(3)]
    grad_eta = np.empty((bvol_conn.shape[0], bt.val.shape[0], 3, 3))
    for c in range(3):
        grad_eta[:, :, c, :] = np.einsum("el,qlk->eqk", comps[c], bt.grad)
    geom = BiotGeometryEval.from_gradients(grad_eta, floor=jac_floor)
    biot_cache = BiotVolumeCache(bt, bvol_conn, geom)

    return GeometryCache(R, fluid_cache, interface_cache, biot_cache, xy_tab)
