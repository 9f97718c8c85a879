"""Outer splitting time loop, geometric monitors and the energy ledger.

Each of the N uniform steps runs the plate substep, rebuilds the smoothed
porous geometry from the lagged displacement, evaluates the geometric
monitors on the candidate state, and only then commits the coupled
fluid/porous solve.  A monitor violation discards the candidate step and
ends the run at the last committed time, which replaces the small-time
existence argument by runtime detection.

The ledger records, for every half step, the seven stored-energy components,
the five dissipation components, the squared-difference numerical-dissipation
terms and both sides of the step identities; the telescoped bound
``E_n + sum of dissipations <= E_0`` is checked against the initial energy.

Index conventions: the plate displacement lives at half-integer indices
(``omega_halves[k]`` is the value after k plate substeps, so entry 0 is the
initial datum), the remaining fields at integer indices.  The plate velocity
before the first step is defined to equal the initial velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coupled import (
    BiotState,
    CoupledStepReport,
    EnergySnapshot,
    FluidState,
    StaticOperators,
    assemble_static_operators,
    fluid_biot_step,
    weighted_fluid_mass,
)
from .errors import CompatibilityError
from .kinematics import GeometryCache, build_geometry_cache
from .mesh import DofLayout, trace_z
from .params import PhysicsParams
from .plate import PlateOperators, PlateState, PlateStepper, PlateStepReport, assemble_plate_operators
from .regularize import MollifierKernel, smooth_displacement


@dataclass(frozen=True)
class MonitorBounds:
    """Runtime thresholds standing in for the existential constants."""

    displacement_max: float  # admissible |omega| and |smoothed trace| (< R)
    jacobian_floor: float = 0.1
    map_norm_max: float = 50.0
    inverse_norm_max: float = 50.0


@dataclass(frozen=True)
class MonitorReport:
    """Extrema of the monitored geometric quantities at one step."""

    step: int
    time: float
    plate_gap_min: float  # min over interface points of R - |omega|
    interface_gap_min: float  # min of R - |smoothed normal trace|
    jacobian_min: float
    map_norm_max: float
    inverse_norm_max: float
    tangential_trace_max: float
    injective: bool
    tripped: bool = False
    violation: str | None = None
    location: tuple[float, float, float] | None = None


@dataclass
class Trajectory:
    """Committed snapshots plus the interpolant accessors."""

    layout: DofLayout
    dt: float
    velocities: list[np.ndarray] = field(default_factory=list)
    multipliers: list[np.ndarray] = field(default_factory=list)
    displacements: list[np.ndarray] = field(default_factory=list)
    biot_velocities: list[np.ndarray] = field(default_factory=list)
    pressures: list[np.ndarray] = field(default_factory=list)
    plate_velocities: list[np.ndarray] = field(default_factory=list)  # integer index
    omega_halves: list[np.ndarray] = field(default_factory=list)  # index k -> omega^(k-1/2)
    zeta_halves: list[np.ndarray] = field(default_factory=list)  # index k -> zeta^(k-1/2)
    smoothed: list[np.ndarray] = field(default_factory=list)  # lagged smoothed field per step

    @property
    def steps_committed(self) -> int:
        return len(self.velocities) - 1

    def _interval_index(self, t: float) -> int:
        """n such that t lies in ((n-1) dt, n dt], right-closed."""
        if not 0.0 < t <= self.steps_committed * self.dt + 1e-12 * self.dt:
            raise ValueError(f"time {t} outside (0, {self.steps_committed * self.dt}]")
        n = int(np.ceil(t / self.dt - 1e-12))
        return min(max(n, 1), self.steps_committed)

    def piecewise_constant(self, t: float) -> dict[str, np.ndarray]:
        """Step-function values, left-open right-closed on each interval."""
        n = self._interval_index(t)
        return {
            "velocity": self.velocities[n],
            "displacement": self.displacements[n],
            "pressure": self.pressures[n],
            "omega": self.omega_halves[n],  # omega^(n-1/2)
            "zeta": self.zeta_halves[n],  # zeta^(n-1/2)
            "zeta_star": self.plate_velocities[n],  # zeta^n
        }

    def linear(self, t: float) -> dict[str, np.ndarray]:
        """Piecewise-linear interpolants with nodes at the integer times."""
        n = self._interval_index(t)
        theta = t / self.dt - (n - 1)
        theta = min(max(theta, 0.0), 1.0)

        def mix(values, lo, hi):
            return (1.0 - theta) * values[lo] + theta * values[hi]

        return {
            "velocity": mix(self.velocities, n - 1, n),
            "displacement": mix(self.displacements, n - 1, n),
            "pressure": mix(self.pressures, n - 1, n),
            "omega": mix(self.omega_halves, n - 1, n),
            "omega_rate": self.zeta_halves[n],  # d/dt of the linear plate path
            "displacement_rate": self.biot_velocities[n],
        }


@dataclass(frozen=True)
class LedgerEntry:
    step: int
    time_half: float
    time_full: float
    plate: PlateStepReport
    coupled: CoupledStepReport
    energy_half: EnergySnapshot
    energy_full: EnergySnapshot
    cumulative_dissipation: float
    bound_slack: float
    monotone_half: bool
    monotone_full: bool
    identity_ok: bool


@dataclass
class EnergyLedger:
    initial_energy: float
    initial_snapshot: EnergySnapshot
    entries: list[LedgerEntry] = field(default_factory=list)

    @property
    def all_identities_ok(self) -> bool:
        return all(e.identity_ok for e in self.entries)

    @property
    def bound_ok(self) -> bool:
        tol = 1e-8 * max(self.initial_energy, 1e-30)
        return all(e.bound_slack >= -tol for e in self.entries)

    @property
    def monotone_ok(self) -> bool:
        return all(e.monotone_half and e.monotone_full for e in self.entries)


def evaluate_monitors(
    layout: DofLayout,
    omega: np.ndarray,
    cache: GeometryCache,
    bounds: MonitorBounds,
    step: int,
    time: float,
) -> MonitorReport:
    """Evaluate all geometric validity monitors at quadrature points.

    ``omega`` is the plate displacement to bound (the candidate half-step
    value); the porous-side quantities come from the cache built on the
    lagged smoothed displacement.
    """
    R = cache.R
    ic = cache.interface
    w_gamma = np.einsum("el,ql->eq", omega[ic.plate_conn], ic.plate_val)
    plate_gap = R - np.abs(w_gamma)
    iface_gap = R - np.abs(ic.reg_trace_z)
    jac = cache.biot.geom.jacobian
    norms, inv_norms = cache.biot.geom.operator_norms()

    candidates = [
        ("plate_gap", float(plate_gap.min()), R - bounds.displacement_max, "min"),
        ("interface_gap", float(iface_gap.min()), R - bounds.displacement_max, "min"),
        ("jacobian_floor", float(jac.min()), bounds.jacobian_floor, "min"),
        ("map_norm", float(norms.max()), bounds.map_norm_max, "max"),
        ("inverse_norm", float(inv_norms.max()), bounds.inverse_norm_max, "max"),
    ]
    violation = None
    for name, value, bound, kind in candidates:
        bad = value < bound if kind == "min" else value > bound
        if bad:
            violation = name
            break

    location = None
    if violation is not None:
        location = _violation_location(layout, cache, violation, w_gamma, iface_gap, jac)

    injective = (float(jac.min()) >= bounds.jacobian_floor) and (
        float(np.abs(ic.reg_trace_z).max()) <= bounds.displacement_max
    )
    return MonitorReport(
        step=step,
        time=time,
        plate_gap_min=float(plate_gap.min()),
        interface_gap_min=float(iface_gap.min()),
        jacobian_min=float(jac.min()),
        map_norm_max=float(norms.max()),
        inverse_norm_max=float(inv_norms.max()),
        tangential_trace_max=float(ic.reg_trace_tan.max()),
        injective=injective,
        tripped=violation is not None,
        violation=violation,
        location=location,
    )


def _violation_location(layout, cache, violation, w_gamma, iface_gap, jac):
    """Reference coordinates of the worst quadrature point."""
    if violation in ("plate_gap", "interface_gap"):
        data = np.abs(w_gamma) if violation == "plate_gap" else -iface_gap
        e, q = np.unravel_index(np.argmax(data), data.shape)
        xy = _face_point(layout, e, cache, q)
        return (xy[0], xy[1], 0.0)
    data = jac if violation == "jacobian_floor" else None
    if data is not None:
        e, q = np.unravel_index(np.argmin(data), data.shape)
    else:
        norms, inv_norms = cache.biot.geom.operator_norms()
        arr = norms if violation == "map_norm" else inv_norms
        e, q = np.unravel_index(np.argmax(arr), arr.shape)
    return _biot_point(layout, e, q, cache)


def _face_point(layout, e, cache, q):
    grid = layout.plate
    hx, hy = grid.spacing
    ei, ej = divmod(e, grid.cells_y)
    pts = cache.interface.points_ref
    return (ei * hx + pts[q, 0] * hx, ej * hy + pts[q, 1] * hy)


def _biot_point(layout, e, q, cache):
    grid = layout.biot
    hx, hy, hz = grid.spacing
    ny, nz = grid.cells_y, grid.cells_z
    ei, rem = divmod(e, ny * nz)
    ej, ek = divmod(rem, nz)
    pt = cache.biot.table.points_ref[q]
    return (ei * hx + pt[0] * hx, ej * hy + pt[1] * hy, ek * hz + pt[2] * hz)


@dataclass(frozen=True)
class InitialData:
    """Nodal initial fields; all arrays in layout ordering."""

    velocity: np.ndarray
    displacement: np.ndarray
    biot_velocity: np.ndarray
    pressure: np.ndarray
    omega: np.ndarray
    zeta: np.ndarray


@dataclass
class RunResult:
    trajectory: Trajectory
    ledger: EnergyLedger
    monitor_history: list[MonitorReport]
    t_max: float
    tripped: bool
    layout: DofLayout
    static: StaticOperators
    plate_ops: PlateOperators

    @property
    def completed(self) -> bool:
        return not self.tripped


def check_initial_data(layout: DofLayout, data: InitialData, R: float) -> None:
    """Enforce masks, interface compatibility and non-degenerate geometry."""
    checks = [
        ("velocity", data.velocity, layout.velocity_mask),
        ("displacement", data.displacement, layout.displacement_mask),
        ("biot_velocity", data.biot_velocity, layout.displacement_mask),
        ("pressure", data.pressure, layout.pressure_mask),
        ("omega", data.omega, layout.plate_mask),
        ("zeta", data.zeta, layout.plate_mask),
    ]
    for name, arr, mask in checks:
        if arr.shape != mask.shape:
            raise CompatibilityError(f"initial {name} has wrong size {arr.shape}")
        worst = np.abs(arr[mask]).max() if mask.any() else 0.0
        if worst > 1e-12:
            raise CompatibilityError(
                f"initial {name} violates its boundary mask by {worst:.3e}"
            )
    omega_vals = layout.transfer.apply(data.omega)
    zeta_vals = layout.transfer.apply(data.zeta)
    eta_tr = trace_z(layout, data.displacement)
    xi_tr = trace_z(layout, data.biot_velocity)
    if np.abs(eta_tr - omega_vals).max() > 1e-10:
        raise CompatibilityError("initial displacement trace does not match the plate")
    if np.abs(xi_tr - zeta_vals).max() > 1e-10:
        raise CompatibilityError("initial velocity trace does not match the plate")
    if np.abs(omega_vals).max() >= R:
        raise CompatibilityError("initial plate displacement touches the fluid floor")


@dataclass(frozen=True)
class DriverSettings:
    T: float
    num_steps: int
    kernel: MollifierKernel
    bounds: MonitorBounds
    identity_tol_plate: float = 1e-10
    identity_tol_coupled: float = 1e-8
    linear_tol: float = 1e-12


def run_splitting(
    layout: DofLayout,
    params: PhysicsParams,
    data: InitialData,
    settings: DriverSettings,
    static: StaticOperators | None = None,
    plate_ops: PlateOperators | None = None,
) -> RunResult:
    """Execute the splitting scheme; halt at the first monitor violation."""
    R = layout.biot.extent_z_hi
    check_initial_data(layout, data, R)
    params.validate()
    if static is None:
        static = assemble_static_operators(layout)
    if plate_ops is None:
        plate_ops = assemble_plate_operators(layout.plate)

    dt = settings.T / settings.num_steps
    stepper = PlateStepper(plate_ops, layout, dt, params.rho_p)

    traj = Trajectory(layout, dt)
    traj.velocities.append(data.velocity.copy())
    traj.multipliers.append(np.zeros(layout.n_fluid_q1))
    traj.displacements.append(data.displacement.copy())
    traj.biot_velocities.append(data.biot_velocity.copy())
    traj.pressures.append(data.pressure.copy())
    traj.plate_velocities.append(data.zeta.copy())
    traj.omega_halves.append(data.omega.copy())
    traj.zeta_halves.append(data.zeta.copy())  # convention for the first interval

    def smooth(eta):
        # The odd extension is taken about the interface trace of the field
        # itself; the trace coincides with the plate displacement at t = 0 but
        # afterwards follows the end-of-step plate velocity, so the two drift
        # apart at consistency order within each step.
        return smooth_displacement(layout, eta, trace_z(layout, eta), settings.kernel)

    # Initial energy and initial monitor check.
    eta_s0 = smooth(data.displacement)
    cache0 = build_geometry_cache(
        layout, data.omega, np.zeros_like(data.zeta), eta_s0
    )
    mass0 = weighted_fluid_mass(layout, cache0, cache0.fluid.jac)
    mass0_vec = sp.block_diag([mass0] * 3).tocsr()
    e0 = EnergySnapshot(
        fluid_kinetic=0.5 * float(data.velocity @ (mass0_vec @ data.velocity)),
        biot_kinetic=0.5
        * params.rho_b
        * float(data.biot_velocity @ (static.biot_mass_vec @ data.biot_velocity)),
        plate_kinetic=0.5 * params.rho_p * float(data.zeta @ (plate_ops.mass @ data.zeta)),
        pressure=0.5 * params.c0 * float(data.pressure @ (static.biot_mass @ data.pressure)),
        elastic_shear=params.mu_e
        * float(data.displacement @ (static.biot_sym_grad @ data.displacement)),
        elastic_bulk=0.5
        * params.lambda_e
        * float(data.displacement @ (static.biot_div_div @ data.displacement)),
        plate_bending=0.5 * float(data.omega @ (plate_ops.bending @ data.omega)),
    )
    ledger = EnergyLedger(initial_energy=e0.total, initial_snapshot=e0)
    monitor_history: list[MonitorReport] = []

    first = evaluate_monitors(layout, data.omega, cache0, settings.bounds, 0, 0.0)
    monitor_history.append(first)
    if first.tripped:
        return RunResult(traj, ledger, monitor_history, 0.0, True, layout, static, plate_ops)

    fluid = FluidState(data.velocity.copy(), np.zeros(layout.n_fluid_q1))
    biot = BiotState(data.displacement.copy(), data.biot_velocity.copy(), data.pressure.copy())
    plate = PlateState(data.omega.copy(), data.zeta.copy())
    prev_total = e0.total
    cum_diss = 0.0

    for n in range(settings.num_steps):
        half, plate_report = stepper.step(PlateState(plate.omega, traj.plate_velocities[-1]))

        eta_s = smooth(biot.displacement)
        cache = build_geometry_cache(layout, plate.omega, half.zeta, eta_s)

        report = evaluate_monitors(
            layout, half.omega, cache, settings.bounds, n + 1, (n + 1) * dt
        )
        monitor_history.append(report)
        if report.tripped:
            return RunResult(
                traj, ledger, monitor_history, n * dt, True, layout, static, plate_ops
            )

        fluid, biot, zeta_new, coupled_report = fluid_biot_step(
            layout,
            static,
            plate_ops,
            params,
            dt,
            cache,
            fluid,
            biot,
            half.zeta,
            half.omega,
            linear_tol=settings.linear_tol,
        )

        traj.velocities.append(fluid.velocity)
        traj.multipliers.append(fluid.multiplier)
        traj.displacements.append(biot.displacement)
        traj.biot_velocities.append(biot.velocity)
        traj.pressures.append(biot.pressure)
        traj.plate_velocities.append(zeta_new)
        traj.omega_halves.append(half.omega)
        traj.zeta_halves.append(half.zeta)
        traj.smoothed.append(eta_s)
        plate = PlateState(half.omega, zeta_new)

        e_half = coupled_report.energy_old
        e_full = coupled_report.energy_new
        cum_diss += coupled_report.dissipation_total
        slack = e0.total - (e_full.total + cum_diss)
        tol_half = 1e-12 * max(prev_total, 1.0)
        entry = LedgerEntry(
            step=n + 1,
            time_half=(n + 0.5) * dt,
            time_full=(n + 1) * dt,
            plate=plate_report,
            coupled=coupled_report,
            energy_half=e_half,
            energy_full=e_full,
            cumulative_dissipation=cum_diss,
            bound_slack=slack,
            monotone_half=e_half.total <= prev_total + tol_half,
            monotone_full=e_full.total <= e_half.total + tol_half,
            identity_ok=(
                plate_report.residual <= settings.identity_tol_plate
                and coupled_report.identity_residual <= settings.identity_tol_coupled
            ),
        )
        ledger.entries.append(entry)
        prev_total = e_full.total

    return RunResult(
        traj, ledger, monitor_history, settings.T, False, layout, static, plate_ops
    )


def velocity_cauchy_difference(
    coarse: Trajectory, fine: Trajectory, mass_flat: sp.csr_matrix
) -> float:
    """Space-time mean-square distance between two step-function velocities.

    Both trajectories are piecewise constant in time; the integral is summed
    exactly over the finer partition using the flat fluid mass matrix.
    """
    n2 = mass_flat.shape[0]
    dt_f = fine.dt
    total = 0.0
    for k in range(1, fine.steps_committed + 1):
        t = k * dt_f
        uf = fine.velocities[k]
        uc = coarse.piecewise_constant(min(t, coarse.steps_committed * coarse.dt))["velocity"]
        d = uf - uc
        for c in range(3):
            dc = d[c * n2 : (c + 1) * n2]
            total += dt_f * float(dc @ (mass_flat @ dc))
    return total
