"""Precomputed element tables for the uniform tensor-product grids.

Because every element of a grid is a translate of the same box, basis values
and physical derivatives at quadrature points are identical across elements
and are tabulated once.  Tables carry:

* ``val``  -- (n_q, n_loc) basis values,
* ``grad`` -- (n_q, n_loc, dim) physical first derivatives,
* for the plate additionally ``lap`` -- (n_q, n_loc) physical Laplacians,
* the quadrature weights already multiplied by the element measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoxGrid, PlateGrid
from .quadrature import gauss_1d, hermite_cubic, lagrange_q1, lagrange_q2


@dataclass(frozen=True)
class VolumeTable:
    points_ref: np.ndarray  # (n_q, 3) in [0,1]^3
    weights: np.ndarray  # (n_q,) including the element volume
    val: np.ndarray  # (n_q, n_loc)
    grad: np.ndarray  # (n_q, n_loc, 3) physical derivatives


@dataclass(frozen=True)
class FaceTable:
    points_ref: np.ndarray  # (n_q, 2) in [0,1]^2
    weights: np.ndarray  # (n_q,) including the face area
    val: np.ndarray  # (n_q, n_loc)


@dataclass(frozen=True)
class PlateTable:
    points_ref: np.ndarray
    weights: np.ndarray
    val: np.ndarray  # (n_q, 16)
    grad: np.ndarray  # (n_q, 16, 2)
    lap: np.ndarray  # (n_q, 16)


def _tensor_points(n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x1, w1 = gauss_1d(n)
    grids = np.meshgrid(*([np.arange(n)] * dim), indexing="ij")
    idx = [g.ravel() for g in grids]
    pts = np.stack([x1[i] for i in idx], axis=-1)
    wts = np.prod(np.stack([w1[i] for i in idx], axis=0), axis=0)
    return pts, wts


def _lagrange_3d(points: np.ndarray, order: int, spacing: tuple[float, float, float]):
    basis = lagrange_q1 if order == 1 else lagrange_q2
    vx, dx = basis(points[:, 0])
    vy, dy = basis(points[:, 1])
    vz, dz = basis(points[:, 2])
    nq = points.shape[0]
    nl1 = order + 1
    val = np.empty((nq, nl1**3))
    grad = np.empty((nq, nl1**3, 3))
    loc = 0
    for c in range(nl1):
        for b in range(nl1):
            for a in range(nl1):
                val[:, loc] = vx[:, a] * vy[:, b] * vz[:, c]
                grad[:, loc, 0] = dx[:, a] * vy[:, b] * vz[:, c] / spacing[0]
                grad[:, loc, 1] = vx[:, a] * dy[:, b] * vz[:, c] / spacing[1]
                grad[:, loc, 2] = vx[:, a] * vy[:, b] * dz[:, c] / spacing[2]
                loc += 1
    return val, grad


def volume_table(grid: BoxGrid, order: int, nq1: int) -> VolumeTable:
    """Volume quadrature/basis table for Q1 (order=1) or Q2 (order=2)."""
    pts, wts = _tensor_points(nq1, 3)
    hx, hy, hz = grid.spacing
    val, grad = _lagrange_3d(pts, order, (hx, hy, hz))
    return VolumeTable(pts, wts * (hx * hy * hz), val, grad)


def _lagrange_2d(points: np.ndarray, order: int):
    basis = lagrange_q1 if order == 1 else lagrange_q2
    vx, _ = basis(points[:, 0])
    vy, _ = basis(points[:, 1])
    nq = points.shape[0]
    nl1 = order + 1
    val = np.empty((nq, nl1**2))
    loc = 0
    for b in range(nl1):
        for a in range(nl1):
            val[:, loc] = vx[:, a] * vy[:, b]
            loc += 1
    return val


def gamma_face_tables(
    fluid: BoxGrid, biot: BoxGrid, nq1: int
) -> tuple[np.ndarray, np.ndarray, FaceTable, FaceTable]:
    """Shared interface rule plus fluid-Q2 and porous-Q1 trace tables.

    Returns (points, weights, fluid_trace, biot_trace); the trace tables use
    the face-local node ordering produced by the connectivity helpers below.
    """
    pts, wts = _tensor_points(nq1, 2)
    hx, hy, _ = fluid.spacing
    area_w = wts * (hx * hy)
    fluid_val = _lagrange_2d(pts, 2)
    biot_val = _lagrange_2d(pts, 1)
    return (
        pts,
        area_w,
        FaceTable(pts, area_w, fluid_val),
        FaceTable(pts, area_w, biot_val),
    )


def plate_table(plate: PlateGrid, nq1: int, points: np.ndarray | None = None) -> PlateTable:
    """Bicubic Hermite table; pass explicit points to share a rule."""
    if points is None:
        pts, wts = _tensor_points(nq1, 2)
    else:
        pts = points
        wts = np.zeros(len(points))
    hx, hy = plate.spacing
    vx, dx, ddx = hermite_cubic(pts[:, 0], hx)
    vy, dy, ddy = hermite_cubic(pts[:, 1], hy)
    nq = pts.shape[0]
    val = np.empty((nq, 16))
    grad = np.empty((nq, 16, 2))
    lap = np.empty((nq, 16))
    # 1D Hermite pair per axis: index 2*a + s, s=0 value DOF, s=1 slope DOF.
    loc = 0
    for b in range(2):
        for a in range(2):
            for d in range(4):
                sx = d in (1, 3)
                sy = d in (2, 3)
                fx, gx, hx2 = (
                    vx[:, 2 * a + sx],
                    dx[:, 2 * a + sx],
                    ddx[:, 2 * a + sx],
                )
                fy, gy, hy2 = (
                    vy[:, 2 * b + sy],
                    dy[:, 2 * b + sy],
                    ddy[:, 2 * b + sy],
                )
                val[:, loc] = fx * fy
                grad[:, loc, 0] = gx * fy
                grad[:, loc, 1] = fx * gy
                lap[:, loc] = hx2 * fy + fx * hy2
                loc += 1
    return PlateTable(pts, wts * (hx * hy), val, grad, lap)


def fluid_top_face_connectivity(fluid: BoxGrid) -> np.ndarray:
    """Q2 node indices of the interface face per plate element, (ne2, 9)."""
    nx, ny, nz = fluid.cells_x, fluid.cells_y, fluid.cells_z
    conn = np.empty((nx * ny, 9), dtype=np.int64)
    e = 0
    for ei in range(nx):
        for ej in range(ny):
            loc = []
            for b in range(3):
                for a in range(3):
                    loc.append(fluid.node_index(2 * ei + a, 2 * ej + b, 2 * nz, refine=2))
            conn[e] = loc
            e += 1
    return conn


def biot_bottom_face_connectivity(biot: BoxGrid) -> np.ndarray:
    """Q1 node indices of the interface face per plate element, (ne2, 4)."""
    nx, ny = biot.cells_x, biot.cells_y
    conn = np.empty((nx * ny, 4), dtype=np.int64)
    e = 0
    for ei in range(nx):
        for ej in range(ny):
            conn[e] = [
                biot.node_index(ei + a, ej + b, 0)
                for b in range(2)
                for a in range(2)
            ]
            e += 1
    return conn
