"""Smoothing pipeline for the porous displacement.

The displacement is extended from the porous box (0,L)^2 x (0,R) to the
enlarged box [-L,2L]^2 x [-R,2R] by successive odd reflections (shifted by
the plate displacement across the interface plane), then convolved with a
compactly supported radially symmetric unit-mass kernel of radius delta.

The reflections make every component odd across the lateral planes
x in {0,L}, y in {0,L} and the top plane z = R.  The discrete convolution
below sums mirror pairs before scaling by the (sign-symmetric) weights, so
the smoothed field vanishes *bit-exactly* on those planes; this is the
boundary-annihilation property the acceptance checks rely on.  Across the
interface plane z = 0 only the tangential components are odd; the normal
component reproduces a smoothed copy of the plate displacement, which is why
the smoothed interface trace need not coincide with the plate displacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import biot_bottom_face_connectivity
from .errors import CompatibilityError, ConfigError
from .mesh import BoxGrid, DofLayout
from .quadrature import gauss_1d, lagrange_q1


@dataclass(frozen=True)
class ExtendedField:
    """Vector field samples on the reflected lattice around the porous box."""

    grid: BoxGrid
    values: np.ndarray  # (3, 3*nx+1, 3*ny+1, 3*nz+1)

    @property
    def origin(self) -> tuple[int, int, int]:
        return self.grid.cells_x, self.grid.cells_y, self.grid.cells_z

    def interior(self) -> np.ndarray:
        nx, ny, nz = self.grid.cells_x, self.grid.cells_y, self.grid.cells_z
        return self.values[:, nx : 2 * nx + 1, ny : 2 * ny + 1, nz : 2 * nz + 1]


@dataclass(frozen=True)
class MollifierKernel:
    """Discrete unit-mass smoothing stencil on the grid lattice.

    ``weights[a, b, c]`` multiplies the field sample offset by
    (a - mx, b - my, c - mz) grid cells; the stencil is symmetric under all
    coordinate sign flips by construction and its weights sum to one after
    renormalization.
    """

    radius: float
    spacing: tuple[float, float, float]
    half_extent: tuple[int, int, int]
    weights: np.ndarray
    normalization: float


def _bump(r2: np.ndarray) -> np.ndarray:
    """Radially symmetric bump profile exp(1/(r^2 - 1)) on r < 1."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    return out


def build_kernel(
    delta: float,
    spacing: tuple[float, float, float],
    extents: tuple[float, float],
    quad_order: int = 3,
    allow_coarse: bool = False,
) -> MollifierKernel:
    """Sample the scaled bump over grid cells and renormalize to unit mass.

    ``extents`` carries (L, R); the kernel radius must satisfy
    delta < min(L, R) so the convolution stays inside the extended box.  By
    default delta must also cover at least two grid cells per axis so the
    bump is resolved; set ``allow_coarse`` to accept one-cell stencils on
    deliberately coarse grids.
    """
    L, R = extents
    if not 0.0 < delta < min(L, R):
        raise ConfigError(f"kernel radius must lie in (0, min(L,R)) = (0, {min(L, R)}), got {delta}")
    hmax = max(spacing)
    if delta < 2.0 * hmax and not allow_coarse:
        raise ConfigError(
            f"kernel radius {delta} does not cover two grid cells (max spacing {hmax}); "
            "refine the grid or set allow_coarse_kernel"
        )
    if delta < hmax:
        raise ConfigError(f"kernel radius {delta} is below the grid spacing {hmax}")

    gx, gw = gauss_1d(quad_order)
    gx = gx - 0.5  # cell-centered offsets in units of one cell
    half = tuple(int(np.floor(delta / h)) for h in spacing)
    mx, my, mz = half
    weights = np.zeros((2 * mx + 1, 2 * my + 1, 2 * mz + 1))
    hx, hy, hz = spacing
    cell_vol = hx * hy * hz
    for a in range(mx + 1):
        for b in range(my + 1):
            for c in range(mz + 1):
                center = np.array([a * hx, b * hy, c * hz])
                if np.dot(center, center) >= delta**2:
                    continue
                X, Y, Z = np.meshgrid(
                    (a + gx) * hx, (b + gx) * hy, (c + gx) * hz, indexing="ij"
                )
                r2 = (X**2 + Y**2 + Z**2) / delta**2
                vals = _bump(r2) / delta**3
                WX, WY, WZ = np.meshgrid(gw, gw, gw, indexing="ij")
                w = float(np.sum(vals * WX * WY * WZ) * cell_vol)
                for sa in ({1} if a == 0 else {1, -1}):
                    for sb in ({1} if b == 0 else {1, -1}):
                        for sc in ({1} if c == 0 else {1, -1}):
                            weights[mx + sa * a, my + sb * b, mz + sc * c] = w
    total = float(weights.sum())
    if total <= 0.0:
        raise ConfigError("kernel sampling produced no interior mass")
    weights /= total
    return MollifierKernel(delta, spacing, half, weights, total)


def odd_extend(layout: DofLayout, eta: np.ndarray, omega_gamma: np.ndarray) -> ExtendedField:
    """Reflect a porous displacement onto the enlarged lattice.

    ``eta`` is the flat component-major nodal field; ``omega_gamma`` the plate
    displacement values at the interface nodes (plate-grid node order).  The
    interface trace of ``eta`` must match ``omega_gamma`` to 1e-10 nodally.
    """
    grid = layout.biot
    nx, ny, nz = grid.cells_x, grid.cells_y, grid.cells_z
    n = layout.n_biot_q1
    field = np.asarray(eta, dtype=float).reshape(3, nx + 1, ny + 1, nz + 1)

    omega_nodes = np.asarray(omega_gamma, dtype=float).reshape(nx + 1, ny + 1)
    mismatch = np.abs(field[2, :, :, 0] - omega_nodes).max()
    if mismatch > 1e-10:
        raise CompatibilityError(
            f"interface trace differs from plate displacement by {mismatch:.3e}"
        )
    if max(np.abs(field[0, :, :, 0]).max(), np.abs(field[1, :, :, 0]).max()) > 1e-10:
        raise CompatibilityError("tangential displacement does not vanish on the interface")

    ext = np.zeros((3, 3 * nx + 1, 3 * ny + 1, 3 * nz + 1))
    sx, sy, sz = slice(nx, 2 * nx + 1), slice(ny, 2 * ny + 1), slice(nz, 2 * nz + 1)
    ext[:, sx, sy, sz] = field

    # Across the interface plane: value + (value - mirrored sample), i.e. the
    # tangential components are plain odd, the normal one is odd about omega.
    for k in range(1, nz + 1):
        ext[0, sx, sy, nz - k] = -ext[0, sx, sy, nz + k]
        ext[1, sx, sy, nz - k] = -ext[1, sx, sy, nz + k]
        ext[2, sx, sy, nz - k] = 2.0 * omega_nodes - ext[2, sx, sy, nz + k]
    # Across the top plane z = R.
    for k in range(1, nz + 1):
        ext[:, sx, sy, 2 * nz + k] = -ext[:, sx, sy, 2 * nz - k]
    # Across x = 0 and x = L (tangential band of original y).
    for i in range(1, nx + 1):
        ext[:, nx - i, sy, :] = -ext[:, nx + i, sy, :]
        ext[:, 2 * nx + i, sy, :] = -ext[:, 2 * nx - i, sy, :]
    # Across y = 0 and y = L over the full extended x range.
    for j in range(1, ny + 1):
        ext[:, :, ny - j, :] = -ext[:, :, ny + j, :]
        ext[:, :, 2 * ny + j, :] = -ext[:, :, 2 * ny - j, :]

    return ExtendedField(grid, ext)


def mollify(extended: ExtendedField, kernel: MollifierKernel) -> np.ndarray:
    """Discrete convolution restricted to the porous-box nodes.

    Returns the smoothed field as a flat component-major nodal vector.
    Mirror samples are combined axis-by-axis before weighting, so sums of
    exact negations cancel bit-exactly on the reflection planes.
    """
    grid = extended.grid
    nx, ny, nz = grid.cells_x, grid.cells_y, grid.cells_z
    mx, my, mz = kernel.half_extent
    if mx > nx or my > ny or mz > nz:
        raise ConfigError("kernel stencil exceeds the extension margin")
    ext = extended.values
    w = kernel.weights

    def view(dx: int, dy: int, dz: int) -> np.ndarray:
        # Sample at (node - offset) for every porous-box node at once.
        return ext[
            :,
            nx - dx : 2 * nx + 1 - dx,
            ny - dy : 2 * ny + 1 - dy,
            nz - dz : 2 * nz + 1 - dz,
        ]

    out = np.zeros((3, nx + 1, ny + 1, nz + 1))
    for a in range(mx + 1):
        for b in range(my + 1):
            for c in range(mz + 1):
                wa = w[mx + a, my + b, mz + c]
                if wa == 0.0:
                    continue

                def zpair(dx: int, dy: int) -> np.ndarray:
                    if c == 0:
                        return view(dx, dy, 0)
                    return view(dx, dy, -c) + view(dx, dy, c)

                def ypair(dx: int) -> np.ndarray:
                    if b == 0:
                        return zpair(dx, 0)
                    return zpair(dx, -b) + zpair(dx, b)

                if a == 0:
                    group = ypair(0)
                else:
                    group = ypair(-a) + ypair(a)
                out += wa * group
    return out.reshape(3 * (nx + 1) * (ny + 1) * (nz + 1))


def smooth_displacement(
    layout: DofLayout, eta: np.ndarray, omega_gamma: np.ndarray, kernel: MollifierKernel
) -> np.ndarray:
    """Convenience: odd extension followed by convolution."""
    return mollify(odd_extend(layout, eta, omega_gamma), kernel)


def regularized_interface_normal(
    layout: DofLayout, eta_smooth: np.ndarray, points: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled interface normal of the smoothed map per face element.

    The normal is built from the slopes of the bilinear interface trace of
    the smoothed normal displacement; the tangential traces are returned
    alongside for monitoring (they vanish up to roundoff but are not part of
    the normal's definition).

    Returns (normals, tangential_max) with shapes (ne2, n_pts, 3) and
    (ne2, n_pts).
    """
    if points is None:
        points = np.array([[0.5, 0.5]])
    grid = layout.biot
    hx, hy, _ = grid.spacing
    conn = biot_bottom_face_connectivity(grid)
    n = layout.n_biot_q1
    vx, dvx = lagrange_q1(points[:, 0])
    vy, dvy = lagrange_q1(points[:, 1])
    val = np.empty((points.shape[0], 4))
    ddx = np.empty_like(val)
    ddy = np.empty_like(val)
    loc = 0
    for b in range(2):
        for a in range(2):
            val[:, loc] = vx[:, a] * vy[:, b]
            ddx[:, loc] = dvx[:, a] * vy[:, b] / hx
            ddy[:, loc] = vx[:, a] * dvy[:, b] / hy
            loc += 1
    ez = eta_smooth[2 * n : 3 * n][conn]
    gx = np.einsum("el,ql->eq", ez, ddx)
    gy = np.einsum("el,ql->eq", ez, ddy)
    normals = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
    tan = np.maximum(
        np.abs(np.einsum("el,ql->eq", eta_smooth[0:n][conn], val)),
        np.abs(np.einsum("el,ql->eq", eta_smooth[n : 2 * n][conn], val)),
    )
    return normals, tan
