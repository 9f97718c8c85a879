"""Shared fixtures: small problem setups and admissible random states."""

from __future__ import annotations

import pytest

from fpsi.config import RunConfig
from fpsi.config import driver_settings  # noqa: F401  (re-exported fixture helper)
from fpsi.coupled import assemble_static_operators
from fpsi.mesh import build_grids
from fpsi.plate import assemble_plate_operators
from fpsi.regularize import build_kernel


class Problem:
    """Grids, layouts and operators bundled for tests."""

    def __init__(self, cells=(2, 2, 2, 2), L=1.0, R=1.0):
        cx, cy, czf, czb = cells
        self.L, self.R = L, R
        self.fluid, self.biot, self.plate, self.layout = build_grids(L, R, cx, cy, czf, czb)
        self.static = assemble_static_operators(self.layout)
        self.plate_ops = assemble_plate_operators(self.plate)

    def kernel(self, delta=None, allow_coarse=True):
        if delta is None:
            delta = 0.8 * min(self.L, self.R)
        return build_kernel(
            delta, self.biot.spacing, (self.L, self.R), allow_coarse=allow_coarse
        )

    def random_state(self, rng, amp=0.05):
        """Mask-respecting random fields with a compatible interface trace."""
        lay = self.layout
        omega = amp * rng.normal(size=lay.n_plate_dofs)
        omega[lay.plate_mask] = 0.0
        zeta = amp * rng.normal(size=lay.n_plate_dofs)
        zeta[lay.plate_mask] = 0.0
        u = amp * rng.normal(size=lay.n_velocity_dofs)
        u[lay.velocity_mask] = 0.0
        xi = amp * rng.normal(size=lay.n_displacement_dofs)
        xi[lay.displacement_mask] = 0.0
        eta = amp * rng.normal(size=lay.n_displacement_dofs)
        eta[lay.displacement_mask] = 0.0
        gz = lay.displacement_gamma_z_dofs()
        free = ~lay.displacement_mask[gz]
        eta[gz[free]] = lay.transfer.apply(omega)[free]
        xi[gz[free]] = lay.transfer.apply(zeta)[free]
        p = amp * rng.normal(size=lay.n_biot_q1)
        p[lay.pressure_mask] = 0.0
        return {"u": u, "xi": xi, "eta": eta, "p": p, "omega": omega, "zeta": zeta}


@pytest.fixture(scope="session")
def tiny():
    return Problem(cells=(2, 2, 2, 2))


@pytest.fixture(scope="session")
def small():
    return Problem(cells=(4, 4, 2, 4))


def smooth_config(cells=(3, 3, 2, 2), T=0.4, N=8, **physics) -> RunConfig:
    cfg = RunConfig()
    cfg.geometry.cells_x, cfg.geometry.cells_y = cells[0], cells[1]
    cfg.geometry.cells_z_fluid, cfg.geometry.cells_z_biot = cells[2], cells[3]
    cfg.time.T, cfg.time.N = T, N
    cfg.regularization.delta = 0.6
    cfg.regularization.allow_coarse_kernel = True
    cfg.initial_data.preset = "smooth"
    if physics:
        from dataclasses import replace

        cfg.physics = replace(cfg.physics, **physics)
    return cfg


