import numpy as np
import pytest

from fpsi.errors import GridError
from fpsi.mesh import build_grids, trace_z


def test_node_counts_2x2x2():
    fluid, biot, plate, layout = build_grids(1.0, 1.0, 2, 2, 2, 2)
    assert biot.num_nodes() == 27
    assert plate.num_nodes == 9
    assert layout.n_fluid_q2 == 125  # quadratic refinement: 5^3


def test_interface_nodes_coincide_bitwise():
    fluid, biot, plate, layout = build_grids(1.0, 1.0, 3, 5, 2, 4)
    fx, fy, fz = fluid.axis_nodes()
    bx, by, bz = biot.axis_nodes()
    px, py = plate.axis_nodes()
    assert np.array_equal(fx, bx) and np.array_equal(fy, by)
    assert np.array_equal(px, bx) and np.array_equal(py, by)
    assert fz[-1] == 0.0 and bz[0] == 0.0
    fc = fluid.node_coords()[layout.gamma_fluid_q1]
    bc = biot.node_coords()[layout.transfer.gamma_nodes]
    assert np.array_equal(fc, bc)


def test_degenerate_inputs_rejected():
    with pytest.raises(GridError):
        build_grids(1.0, 1.0, 2, 2, 0, 2)
    with pytest.raises(GridError):
        build_grids(-1.0, 1.0, 2, 2, 2, 2)
    with pytest.raises(GridError):
        build_grids(1.0, 1.0, 1, 2, 2, 2)


def test_node_coordinates_reproducible():
    g1 = build_grids(1.0, 2.0, 3, 3, 2, 3)[1]
    g2 = build_grids(1.0, 2.0, 3, 3, 2, 3)[1]
    assert np.array_equal(g1.node_coords(), g2.node_coords())


def test_trace_zero_field(tiny):
    assert np.all(trace_z(tiny.layout, np.zeros(tiny.layout.n_displacement_dofs)) == 0.0)


def test_trace_linear_profile(tiny):
    # eta = (0, 0, (z - R) c) has trace value -R c at every interface node
    c = 0.7
    coords = tiny.biot.node_coords()
    eta = np.zeros(tiny.layout.n_displacement_dofs)
    eta[2 * tiny.layout.n_biot_q1 :] = (coords[:, 2] - tiny.R) * c
    tr = trace_z(tiny.layout, eta)
    assert np.allclose(tr, -tiny.R * c, rtol=0, atol=1e-15)


def test_trace_matches_direct_lookup(tiny):
    rng = np.random.default_rng(5)
    eta = rng.normal(size=tiny.layout.n_displacement_dofs)
    eta[tiny.layout.displacement_mask] = 0.0
    tr = trace_z(tiny.layout, eta)
    # independent brute-force lookup over the interface nodes
    nb = tiny.layout.n_biot_q1
    px, py = tiny.plate.node_counts()
    expected = np.empty(px * py)
    k = 0
    for i in range(px):
        for j in range(py):
            node = tiny.biot.node_index(i, j, 0)
            expected[k] = eta[2 * nb + node]
            k += 1
    assert np.array_equal(tr, expected)


def test_trace_size_mismatch(tiny):
    with pytest.raises(GridError):
        trace_z(tiny.layout, np.zeros(5))


def test_masks_annihilate_exact_boundary_sets(tiny):
    lay = tiny.layout
    coords2 = tiny.fluid.node_coords(refine=2)
    n2 = lay.n_fluid_q2
    L, R = tiny.L, tiny.R
    on_wall = (
        np.isclose(coords2[:, 0], 0) | np.isclose(coords2[:, 0], L)
        | np.isclose(coords2[:, 1], 0) | np.isclose(coords2[:, 1], L)
        | np.isclose(coords2[:, 2], -R)
    )
    for c in range(3):
        assert np.array_equal(lay.velocity_mask[c * n2 : (c + 1) * n2], on_wall)

    bc = tiny.biot.node_coords()
    nb = lay.n_biot_q1
    lateral_top = (
        np.isclose(bc[:, 0], 0) | np.isclose(bc[:, 0], L)
        | np.isclose(bc[:, 1], 0) | np.isclose(bc[:, 1], L)
        | np.isclose(bc[:, 2], R)
    )
    on_gamma = np.isclose(bc[:, 2], 0)
    assert np.array_equal(lay.displacement_mask[0:nb], lateral_top | on_gamma)
    assert np.array_equal(lay.displacement_mask[nb : 2 * nb], lateral_top | on_gamma)
    assert np.array_equal(lay.displacement_mask[2 * nb :], lateral_top)
    assert np.array_equal(lay.pressure_mask, lateral_top)

    pc = tiny.plate.node_coords()
    on_edge = (
        np.isclose(pc[:, 0], 0) | np.isclose(pc[:, 0], L)
        | np.isclose(pc[:, 1], 0) | np.isclose(pc[:, 1], L)
    )
    assert np.array_equal(lay.plate_mask.reshape(-1, 4).any(axis=1), on_edge)
    assert np.array_equal(lay.plate_mask.reshape(-1, 4).all(axis=1), on_edge)


def test_transfer_of_zero_is_zero(tiny):
    out = tiny.layout.transfer.apply(np.zeros(tiny.layout.n_plate_dofs))
    assert np.all(out == 0.0)


def test_transfer_reproduces_nodal_values(tiny):
    rng = np.random.default_rng(0)
    coeffs = rng.normal(size=tiny.layout.n_plate_dofs)
    vals = tiny.layout.transfer.apply(coeffs)
    assert np.array_equal(vals, coeffs[0::4])
