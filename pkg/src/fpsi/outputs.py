"""Serialization of trajectories, energy ledgers and monitor logs.

Text formats only: the energy trace is a CSV with one row per half step and
a frozen column order, field dumps are plain-text nodal records behind a
JSON metadata header, and the monitor log is JSON lines.  All floats are
written with 17 significant digits so reloading a dump reproduces the ledger
entries to full double precision.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from .config import RunConfig
from .coupled import EnergySnapshot, StaticOperators
from .driver import EnergyLedger, MonitorReport, RunResult, Trajectory
from .elements import plate_table, volume_table
from .mesh import DofLayout
from .params import PhysicsParams
from .plate import PlateOperators

CSV_COLUMNS = [
    "step",
    "time",
    "phase",
    "E_total",
    "E_fluid_kinetic",
    "E_biot_kinetic",
    "E_plate_kinetic",
    "E_pressure",
    "E_elastic_shear",
    "E_elastic_bulk",
    "E_plate_bending",
    "D_total",
    "D_fluid_viscous",
    "D_biot_visc_shear",
    "D_biot_visc_bulk",
    "D_darcy",
    "D_bjs",
    "ND_total",
    "ND_fluid_kinetic",
    "ND_biot_kinetic",
    "ND_plate_kinetic",
    "ND_pressure",
    "ND_elastic_shear",
    "ND_elastic_bulk",
    "ND_plate_bending",
    "identity_lhs",
    "identity_rhs",
    "identity_residual",
    "cumulative_dissipation",
    "energy_bound_slack",
]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _snapshot_cells(e: EnergySnapshot) -> list[float]:
    return [
        e.total,
        e.fluid_kinetic,
        e.biot_kinetic,
        e.plate_kinetic,
        e.pressure,
        e.elastic_shear,
        e.elastic_bulk,
        e.plate_bending,
    ]


def energy_csv_rows(ledger: EnergyLedger) -> list[list]:
    """All rows of the energy trace, initial state first."""
    rows: list[list] = []
    e0 = ledger.initial_snapshot
    rows.append(
        [0, 0.0, "initial", *_snapshot_cells(e0), *([0.0] * 6), *([0.0] * 8),
         e0.total, e0.total, 0.0, 0.0, 0.0]
    )
    for entry in ledger.entries:
        p = entry.plate
        c = entry.coupled
        cum_before = entry.cumulative_dissipation - c.dissipation_total
        nd_plate = p.numdiss_velocity + p.numdiss_bending
        rows.append(
            [
                entry.step,
                entry.time_half,
                "plate",
                *_snapshot_cells(entry.energy_half),
                *([0.0] * 6),
                nd_plate, 0.0, 0.0, p.numdiss_velocity, 0.0, 0.0, 0.0, p.numdiss_bending,
                p.lhs,
                p.rhs,
                p.residual,
                cum_before,
                ledger.initial_energy - (entry.energy_half.total + cum_before),
            ]
        )
        rows.append(
            [
                entry.step,
                entry.time_full,
                "fluid_biot",
                *_snapshot_cells(entry.energy_full),
                c.dissipation_total,
                c.diss_viscous,
                c.diss_viscoelastic_shear,
                c.diss_viscoelastic_bulk,
                c.diss_darcy,
                c.diss_bjs,
                c.numdiss_total,
                c.numdiss_fluid,
                c.numdiss_biot_velocity,
                c.numdiss_plate_velocity,
                c.numdiss_pressure,
                c.numdiss_elastic_shear,
                c.numdiss_elastic_bulk,
                0.0,
                c.identity_lhs,
                c.identity_rhs,
                c.identity_residual,
                entry.cumulative_dissipation,
                entry.bound_slack,
            ]
        )
    return rows


def write_energy_csv(ledger: EnergyLedger, path: Path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for row in energy_csv_rows(ledger):
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def read_energy_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_monitor_log(history: list[MonitorReport], t_max: float, path: Path) -> None:
    lines = []
    for rep in history:
        rec = asdict(rep)
        if rep.tripped:
            rec["t_max"] = t_max
        lines.append(json.dumps(rec, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Field dumps


def _field_entries(layout: DofLayout, traj: Trajectory, n: int):
    fl, bi, pl = layout.fluid, layout.biot, layout.plate
    f2 = fl.node_coords(refine=2)
    f1 = fl.node_coords(refine=1)
    b1 = bi.node_coords(refine=1)
    p2 = pl.node_coords()
    pz = np.zeros((p2.shape[0], 1))
    plate_coords = np.hstack([p2, pz])
    n2 = layout.n_fluid_q2
    nb = layout.n_biot_q1

    def vec(arr, n_nodes):
        return np.stack([arr[c * n_nodes : (c + 1) * n_nodes] for c in range(3)], axis=-1)

    def plate4(arr):
        return arr.reshape(-1, 4)

    return [
        ("velocity", "length/time", f2, vec(traj.velocities[n], n2)),
        ("multiplier", "pressure", f1, traj.multipliers[n][:, None]),
        ("displacement", "length", b1, vec(traj.displacements[n], nb)),
        ("biot_velocity", "length/time", b1, vec(traj.biot_velocities[n], nb)),
        ("pressure", "pressure", b1, traj.pressures[n][:, None]),
        ("omega", "length (value, dx, dy, dxy)", plate_coords, plate4(traj.omega_halves[n])),
        ("zeta", "length/time (value, dx, dy, dxy)", plate_coords, plate4(traj.plate_velocities[n])),
        ("zeta_half", "length/time (value, dx, dy, dxy)", plate_coords, plate4(traj.zeta_halves[n])),
    ]


def write_field_dump(layout: DofLayout, traj: Trajectory, n: int, path: Path) -> None:
    """One plain-text dump of every field at integer time level n."""
    entries = _field_entries(layout, traj, n)
    header = {
        "step": n,
        "time": n * traj.dt,
        "fields": [
            {"name": name, "units": units, "count": int(coords.shape[0]), "components": int(vals.shape[1])}
            for name, units, coords, vals in entries
        ],
    }
    lines = [json.dumps(header, sort_keys=True)]
    for name, _, coords, vals in entries:
        lines.append(f"# {name}")
        for i in range(coords.shape[0]):
            cells = [str(i), *(_fmt(c) for c in coords[i]), *(_fmt(v) for v in vals[i])]
            lines.append(" ".join(cells))
    path.write_text("\n".join(lines) + "\n")


def load_field_dump(path: Path) -> dict:
    lines = Path(path).read_text().strip().split("\n")
    header = json.loads(lines[0])
    fields = {}
    idx = 1
    for meta in header["fields"]:
        assert lines[idx] == f"# {meta['name']}"
        idx += 1
        count, comps = meta["count"], meta["components"]
        vals = np.empty((count, comps))
        for i in range(count):
            parts = lines[idx].split()
            vals[i] = [float(v) for v in parts[4:]]
            idx += 1
        fields[meta["name"]] = vals
    return {"header": header, "fields": fields}


def flat_from_dump(fields: dict, name: str) -> np.ndarray:
    """Reassemble a component-major flat vector from dumped records."""
    vals = fields[name]
    if vals.shape[1] == 1:
        return vals[:, 0].copy()
    return np.concatenate([vals[:, c] for c in range(vals.shape[1])])


def energy_from_fields(
    layout: DofLayout,
    static: StaticOperators,
    plate_ops: PlateOperators,
    params: PhysicsParams,
    fields: dict,
) -> EnergySnapshot:
    """Recompute the stored-energy components of a dumped time level."""
    u = flat_from_dump(fields, "velocity")
    xi = flat_from_dump(fields, "biot_velocity")
    eta = flat_from_dump(fields, "displacement")
    p = flat_from_dump(fields, "pressure")
    omega = fields["omega"].reshape(-1)
    zeta = fields["zeta"].reshape(-1)
    mass = _weighted_mass(layout, omega)
    mass_vec = sp.block_diag([mass] * 3).tocsr()
    return EnergySnapshot(
        fluid_kinetic=0.5 * float(u @ (mass_vec @ u)),
        biot_kinetic=0.5 * params.rho_b * float(xi @ (static.biot_mass_vec @ xi)),
        plate_kinetic=0.5 * params.rho_p * float(zeta @ (plate_ops.mass @ zeta)),
        pressure=0.5 * params.c0 * float(p @ (static.biot_mass @ p)),
        elastic_shear=params.mu_e * float(eta @ (static.biot_sym_grad @ eta)),
        elastic_bulk=0.5 * params.lambda_e * float(eta @ (static.biot_div_div @ eta)),
        plate_bending=0.5 * float(omega @ (plate_ops.bending @ omega)),
    )


def _weighted_mass(layout: DofLayout, omega: np.ndarray, nq: int = 4) -> sp.csr_matrix:
    """Scalar Q2 fluid mass weighted by 1 + omega/R from plate coefficients."""
    fluid, plate = layout.fluid, layout.plate
    R = layout.biot.extent_z_hi
    vt = volume_table(fluid, 2, nq)
    xy_tab = plate_table(plate, nq, points=vt.points_ref[:, :2])
    plate_conn = plate.cell_connectivity()
    nz = fluid.cells_z
    ne2 = plate_conn.shape[0]
    col_of = np.repeat(np.arange(ne2), nz)
    vals = np.einsum("el,ql->eq", omega[plate_conn], xy_tab.val)
    jac = 1.0 + vals[col_of] / R
    conn = fluid.cell_connectivity(2)
    n2 = layout.n_fluid_q2
    loc = np.einsum("q,eq,qb,qa->eba", vt.weights, jac, vt.val, vt.val)
    ne, nl = conn.shape
    rows = np.repeat(conn, nl, axis=1).ravel()
    cols = np.tile(conn, (1, nl)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n2, n2)).tocsr()


# ---------------------------------------------------------------------------
# Bundles


def write_outputs(
    result: RunResult,
    config: RunConfig,
    outdir: Path,
    wall_clock: float,
    extra_manifest: dict | None = None,
) -> dict:
    """Write the full output bundle; returns the manifest dictionary."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []

    csv_path = outdir / "energy_trace.csv"
    write_energy_csv(result.ledger, csv_path)
    files.append(csv_path.name)

    mon_path = outdir / "monitors.jsonl"
    write_monitor_log(result.monitor_history, result.t_max, mon_path)
    files.append(mon_path.name)

    steps = result.trajectory.steps_committed
    dump_steps = {0, steps}
    if config.output.dump_every > 0:
        dump_steps.update(range(0, steps + 1, config.output.dump_every))
    for n in sorted(dump_steps):
        dump_path = outdir / f"fields_step_{n:04d}.txt"
        write_field_dump(result.layout, result.trajectory, n, dump_path)
        files.append(dump_path.name)

    manifest = {
        "package_version": __version__,
        "config": config.echo(),
        "wall_clock_seconds": wall_clock,
        "t_max": result.t_max,
        "tripped": result.tripped,
        "identities_ok": result.ledger.all_identities_ok,
        "bound_ok": result.ledger.bound_ok,
        "monotone_ok": result.ledger.monotone_ok,
        "steps_committed": steps,
        "files": files,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
