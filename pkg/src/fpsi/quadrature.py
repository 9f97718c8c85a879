"""Gauss quadrature rules and 1D shape functions on the unit interval.

All elements in this package are tensor products of the 1D families below:
linear and quadratic Lagrange polynomials for the volume fields, and cubic
Hermite pairs (value / slope) for the C1 plate element.  Everything is
evaluated on the reference interval [0, 1]; physical derivatives are obtained
by dividing by the element size once per axis.
"""

from __future__ import annotations

import numpy as np


def gauss_1d(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1].

    Exact for polynomials of degree <= 2*npts - 1.
    """
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def tensor_rule(npts: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss rule on the unit cube [0,1]^dim.

    Returns (points, weights) with points of shape (npts**dim, dim).  The
    point ordering iterates the last axis fastest, matching the local node
    ordering used by the element connectivity builders.
    """
    x1, w1 = gauss_1d(npts)
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(npts**dim)
    for axis in range(dim):
        wts *= np.meshgrid(*([w1] * dim), indexing="ij")[axis].ravel()
    return pts, wts


def lagrange_q1(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear Lagrange basis on [0,1]: values and d/dxi, shapes (n, 2)."""
    xi = np.asarray(xi, dtype=float)
    val = np.stack([1.0 - xi, xi], axis=-1)
    der = np.stack([-np.ones_like(xi), np.ones_like(xi)], axis=-1)
    return val, der


def lagrange_q2(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic Lagrange basis on [0,1] with nodes {0, 1/2, 1}."""
    xi = np.asarray(xi, dtype=float)
    val = np.stack(
        [
            (2.0 * xi - 1.0) * (xi - 1.0),
            4.0 * xi * (1.0 - xi),
            xi * (2.0 * xi - 1.0),
        ],
        axis=-1,
    )
    der = np.stack(
        [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0],
        axis=-1,
    )
    return val, der


def hermite_cubic(xi: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cubic Hermite basis on an interval of length h, parametrized on [0,1].

    Ordering: (value at 0, slope at 0, value at 1, slope at 1).  The slope
    functions carry the factor h so that coefficients are physical-derivative
    degrees of freedom.  Returns values, first and second physical
    derivatives, each of shape (n, 4).
    """
    xi = np.asarray(xi, dtype=float)
    one = np.ones_like(xi)
    val = np.stack(
        [
            1.0 - 3.0 * xi**2 + 2.0 * xi**3,
            h * (xi - 2.0 * xi**2 + xi**3),
            3.0 * xi**2 - 2.0 * xi**3,
            h * (xi**3 - xi**2),
        ],
        axis=-1,
    )
    dref = np.stack(
        [
            -6.0 * xi + 6.0 * xi**2,
            h * (one - 4.0 * xi + 3.0 * xi**2),
            6.0 * xi - 6.0 * xi**2,
            h * (3.0 * xi**2 - 2.0 * xi),
        ],
        axis=-1,
    )
    ddref = np.stack(
        [
            -6.0 * one + 12.0 * xi,
            h * (-4.0 * one + 6.0 * xi),
            6.0 * one - 12.0 * xi,
            h * (6.0 * xi - 2.0 * one),
        ],
        axis=-1,
    )
    return val, dref / h, ddref / h**2
