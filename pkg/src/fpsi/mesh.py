"""Structured tensor-product grids over the reference boxes and DOF layouts.

The three reference domains are boxes sharing the interface plane z = 0:
the fluid occupies (0,L)^2 x (-R,0), the porous layer (0,L)^2 x (0,R), and
the plate lives on (0,L)^2.  All grids are uniform tensor products, so the
interface discretizations coincide node-for-node and element-for-element.

Field spaces
------------
* fluid velocity: vector triquadratic (27-node hexahedra) on the fluid grid,
* divergence multiplier: trilinear on the fluid grid,
* porous displacement / velocity: vector trilinear on the porous grid,
* pore pressure: trilinear on the porous grid,
* plate displacement / velocity: bicubic Hermite rectangles with four degrees
  of freedom per node (value, d/dx, d/dy, d2/dxdy), which is C1-conforming
  and realizes the clamped space exactly when all boundary-node DOFs are
  zeroed.

Vector fields are stored component-major: dof = comp * n_nodes + node.
Plate DOFs are stored node-major: dof = node * 4 + (w, wx, wy, wxy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError

PLATE_DOFS_PER_NODE = 4


@dataclass(frozen=True)
class BoxGrid:
    """Uniform tensor grid on [x0,x0+Lx] x [y0,y0+Ly] x [z0,z0+Lz].

    Node coordinates are generated as index * spacing (plus origin) so the
    same (extent, cells) inputs always reproduce them bit-exactly.
    """

    extent_x: float
    extent_y: float
    extent_z_lo: float
    extent_z_hi: float
    cells_x: int
    cells_y: int
    cells_z: int

    def __post_init__(self):
        if self.extent_x <= 0 or self.extent_y <= 0:
            raise GridError("horizontal extents must be positive")
        if self.extent_z_hi <= self.extent_z_lo:
            raise GridError("z extents out of order")
        if min(self.cells_x, self.cells_y, self.cells_z) < 1:
            raise GridError("cell counts must be positive")

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (
            self.extent_x / self.cells_x,
            self.extent_y / self.cells_y,
            (self.extent_z_hi - self.extent_z_lo) / self.cells_z,
        )

    def axis_nodes(self, refine: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """1D node coordinates per axis; refine=2 gives the quadratic grid."""
        hx, hy, hz = self.spacing
        nx, ny, nz = refine * self.cells_x, refine * self.cells_y, refine * self.cells_z
        xs = np.arange(nx + 1) * (hx / refine)
        ys = np.arange(ny + 1) * (hy / refine)
        # Anchor the z axis at the interface plane when the box touches z=0,
        # so interface nodes are exactly 0.0 on both volume grids.
        if self.extent_z_hi == 0.0:
            zs = (np.arange(nz + 1) - nz) * (hz / refine)
        else:
            zs = self.extent_z_lo + np.arange(nz + 1) * (hz / refine)
        return xs, ys, zs

    def node_counts(self, refine: int = 1) -> tuple[int, int, int]:
        return (
            refine * self.cells_x + 1,
            refine * self.cells_y + 1,
            refine * self.cells_z + 1,
        )

    def num_nodes(self, refine: int = 1) -> int:
        px, py, pz = self.node_counts(refine)
        return px * py * pz

    def node_coords(self, refine: int = 1) -> np.ndarray:
        xs, ys, zs = self.axis_nodes(refine)
        X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)

    def node_index(self, i, j, k, refine: int = 1) -> np.ndarray:
        px, py, pz = self.node_counts(refine)
        return (np.asarray(i) * py + np.asarray(j)) * pz + np.asarray(k)

    def cell_connectivity(self, order: int) -> np.ndarray:
        """Element-to-node map, shape (n_cells, (order+1)**3).

        Local nodes iterate ix, then iy, then iz fastest along z to match the
        tensor basis ordering used by the assembly routines.
        """
        nx, ny, nz = self.cells_x, self.cells_y, self.cells_z
        conn = np.empty((nx * ny * nz, (order + 1) ** 3), dtype=np.int64)
        e = 0
        # x-offset varies fastest, matching the tensor basis tables.
        offs = [
            (a, b, c)
            for c in range(order + 1)
            for b in range(order + 1)
            for a in range(order + 1)
        ]
        for ei in range(nx):
            for ej in range(ny):
                for ek in range(nz):
                    base = (order * ei, order * ej, order * ek)
                    conn[e] = [
                        self.node_index(base[0] + a, base[1] + b, base[2] + c, refine=order)
                        for (a, b, c) in offs
                    ]
                    e += 1
        return conn


@dataclass(frozen=True)
class PlateGrid:
    """2D tensor grid on [0,L]^2 shared with the interface faces."""

    extent_x: float
    extent_y: float
    cells_x: int
    cells_y: int

    @property
    def spacing(self) -> tuple[float, float]:
        return self.extent_x / self.cells_x, self.extent_y / self.cells_y

    def axis_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        hx, hy = self.spacing
        return np.arange(self.cells_x + 1) * hx, np.arange(self.cells_y + 1) * hy

    def node_counts(self) -> tuple[int, int]:
        return self.cells_x + 1, self.cells_y + 1

    @property
    def num_nodes(self) -> int:
        return (self.cells_x + 1) * (self.cells_y + 1)

    @property
    def num_dofs(self) -> int:
        return PLATE_DOFS_PER_NODE * self.num_nodes

    def node_index(self, i, j) -> np.ndarray:
        return np.asarray(i) * (self.cells_y + 1) + np.asarray(j)

    def node_coords(self) -> np.ndarray:
        xs, ys = self.axis_nodes()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def cell_connectivity(self) -> np.ndarray:
        """Element-to-DOF map, shape (n_cells, 16)."""
        conn = np.empty((self.cells_x * self.cells_y, 16), dtype=np.int64)
        e = 0
        for ei in range(self.cells_x):
            for ej in range(self.cells_y):
                loc = []
                for b in range(2):
                    for a in range(2):
                        node = self.node_index(ei + a, ej + b)
                        loc.extend(node * 4 + d for d in range(4))
                conn[e] = loc
                e += 1
        return conn


def _boundary_mask_3d(grid: BoxGrid, refine: int, sides: dict[str, bool]) -> np.ndarray:
    """Boolean node mask for selected box faces (True = constrained)."""
    px, py, pz = grid.node_counts(refine)
    mask = np.zeros((px, py, pz), dtype=bool)
    if sides.get("x"):
        mask[0, :, :] = True
        mask[-1, :, :] = True
    if sides.get("y"):
        mask[:, 0, :] = True
        mask[:, -1, :] = True
    if sides.get("z_lo"):
        mask[:, :, 0] = True
    if sides.get("z_hi"):
        mask[:, :, -1] = True
    return mask.ravel()


@dataclass
class TraceTransfer:
    """Identification of plate value-DOFs with interface nodal values.

    ``gamma_nodes[g]`` is the porous-grid node index of interface node g and
    ``plate_value_dofs[g]`` the plate DOF carrying the displacement value at
    the same (x, y) position.  Plate derivative DOFs do not enter.
    """

    gamma_nodes: np.ndarray
    plate_value_dofs: np.ndarray

    def apply(self, plate_coeffs: np.ndarray) -> np.ndarray:
        """Plate coefficients -> interface nodal values."""
        plate_coeffs = np.asarray(plate_coeffs)
        if plate_coeffs.shape[-1] <= self.plate_value_dofs.max():
            raise GridError("plate coefficient vector has wrong size")
        return plate_coeffs[..., self.plate_value_dofs]

    def transpose_apply(self, gamma_values: np.ndarray, n_plate_dofs: int) -> np.ndarray:
        """Interface nodal loads -> plate coefficient loads."""
        out = np.zeros(n_plate_dofs)
        out[self.plate_value_dofs] = np.asarray(gamma_values)
        return out


@dataclass
class DofLayout:
    """Per-field DOF counts, Dirichlet masks and interface index maps.

    Masks are boolean arrays over scalar DOFs with True marking a constrained
    (zero) DOF.  Vector masks are stored per component block.
    """

    fluid: BoxGrid
    biot: BoxGrid
    plate: PlateGrid

    n_fluid_q2: int = field(init=False)
    n_fluid_q1: int = field(init=False)
    n_biot_q1: int = field(init=False)

    velocity_mask: np.ndarray = field(init=False)
    displacement_mask: np.ndarray = field(init=False)
    pressure_mask: np.ndarray = field(init=False)
    plate_mask: np.ndarray = field(init=False)

    gamma_fluid_q2: np.ndarray = field(init=False)
    gamma_fluid_q1: np.ndarray = field(init=False)
    transfer: TraceTransfer = field(init=False)

    def __post_init__(self):
        self.n_fluid_q2 = self.fluid.num_nodes(refine=2)
        self.n_fluid_q1 = self.fluid.num_nodes(refine=1)
        self.n_biot_q1 = self.biot.num_nodes(refine=1)

        # Fluid velocity: zero on every face except the interface z = 0.
        scalar = _boundary_mask_3d(
            self.fluid, 2, {"x": True, "y": True, "z_lo": True, "z_hi": False}
        )
        self.velocity_mask = np.tile(scalar, 3)

        # Porous displacement/velocity: zero on lateral and top faces for all
        # components; tangential components additionally zero on the interface.
        clamped = _boundary_mask_3d(
            self.biot, 1, {"x": True, "y": True, "z_lo": False, "z_hi": True}
        )
        on_gamma = _boundary_mask_3d(
            self.biot, 1, {"x": False, "y": False, "z_lo": True, "z_hi": False}
        )
        self.displacement_mask = np.concatenate(
            [clamped | on_gamma, clamped | on_gamma, clamped]
        )

        # Pore pressure: zero on lateral and top faces, free on the interface.
        self.pressure_mask = clamped.copy()

        # Plate: clamped edge, all four Hermite DOFs zeroed at boundary nodes
        # (value, both slopes and the twist; the twist must vanish so the
        # normal-slope trace is identically zero along each edge).
        px, py = self.plate.node_counts()
        pmask = np.zeros((px, py), dtype=bool)
        pmask[0, :] = pmask[-1, :] = True
        pmask[:, 0] = pmask[:, -1] = True
        self.plate_mask = np.repeat(pmask.ravel(), PLATE_DOFS_PER_NODE)

        # Interface node maps in plate-grid node order.
        ii, jj = np.meshgrid(np.arange(px), np.arange(py), indexing="ij")
        plate_nodes = self.plate.node_index(ii.ravel(), jj.ravel())
        gamma_biot = self.biot.node_index(ii.ravel(), jj.ravel(), 0)
        self.transfer = TraceTransfer(
            gamma_nodes=gamma_biot,
            plate_value_dofs=plate_nodes * PLATE_DOFS_PER_NODE,
        )
        nzf2 = 2 * self.fluid.cells_z
        self.gamma_fluid_q2 = self.fluid.node_index(
            2 * ii.ravel(), 2 * jj.ravel(), nzf2, refine=2
        )
        self.gamma_fluid_q1 = self.fluid.node_index(
            ii.ravel(), jj.ravel(), self.fluid.cells_z, refine=1
        )

    @property
    def n_velocity_dofs(self) -> int:
        return 3 * self.n_fluid_q2

    @property
    def n_displacement_dofs(self) -> int:
        return 3 * self.n_biot_q1

    @property
    def n_plate_dofs(self) -> int:
        return self.plate.num_dofs

    def displacement_gamma_z_dofs(self) -> np.ndarray:
        """Scalar DOF indices of the z-component on the interface face."""
        return 2 * self.n_biot_q1 + self.transfer.gamma_nodes


def build_grids(
    L: float, R: float, cells_x: int, cells_y: int, cells_z_fluid: int, cells_z_biot: int
) -> tuple[BoxGrid, BoxGrid, PlateGrid, DofLayout]:
    """Construct the three conforming grids and the DOF layout.

    Raises GridError for non-positive dimensions or cell counts below 2 per
    axis (a single cell cannot carry any free interior plate DOF).
    """
    if L <= 0 or R <= 0:
        raise GridError(f"domain extents must be positive, got L={L}, R={R}")
    for name, n in (
        ("cells_x", cells_x),
        ("cells_y", cells_y),
        ("cells_z_fluid", cells_z_fluid),
        ("cells_z_biot", cells_z_biot),
    ):
        if n < 2:
            raise GridError(f"{name} must be >= 2, got {n}")
    fluid = BoxGrid(L, L, -R, 0.0, cells_x, cells_y, cells_z_fluid)
    biot = BoxGrid(L, L, 0.0, R, cells_x, cells_y, cells_z_biot)
    plate = PlateGrid(L, L, cells_x, cells_y)

    fx, fy, _ = fluid.axis_nodes()
    bx, by, bz = biot.axis_nodes()
    pxs, pys = plate.axis_nodes()
    if not (np.array_equal(fx, bx) and np.array_equal(fy, by)):
        raise GridError("fluid and porous grids disagree on the interface")
    if not (np.array_equal(pxs, bx) and np.array_equal(pys, by)):
        raise GridError("plate grid does not match the interface discretization")
    if bz[0] != 0.0:
        raise GridError("porous grid must start at the interface plane z=0")

    return fluid, biot, plate, DofLayout(fluid, biot, plate)


def trace_z(layout: DofLayout, displacement: np.ndarray) -> np.ndarray:
    """z-component nodal values of a porous displacement on the interface.

    The tangential components vanish there by the Dirichlet mask, so this is
    the full interface trace.
    """
    displacement = np.asarray(displacement)
    if displacement.shape != (layout.n_displacement_dofs,):
        raise GridError(
            f"displacement vector has size {displacement.shape}, "
            f"expected ({layout.n_displacement_dofs},)"
        )
    return displacement[layout.displacement_gamma_z_dofs()]
