"""Report figures rendered next to the delimited output.

All plots are produced from the in-memory ledger and monitor history with the
Agg backend, so the report path works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .driver import EnergyLedger, MonitorReport

ENERGY_COMPONENTS = [
    ("fluid_kinetic", "fluid kinetic"),
    ("biot_kinetic", "porous kinetic"),
    ("plate_kinetic", "plate kinetic"),
    ("pressure", "pore pressure"),
    ("elastic_shear", "elastic (shear)"),
    ("elastic_bulk", "elastic (bulk)"),
    ("plate_bending", "plate bending"),
]


def _times_and_snapshots(ledger: EnergyLedger):
    times = [0.0]
    snaps = [ledger.initial_snapshot]
    for e in ledger.entries:
        times.extend([e.time_half, e.time_full])
        snaps.extend([e.energy_half, e.energy_full])
    return times, snaps


def render_report(
    ledger: EnergyLedger, monitors: list[MonitorReport], outdir: Path
) -> list[str]:
    """Write the standard figure set; returns the file names."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    times, snaps = _times_and_snapshots(ledger)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    for attr, label in ENERGY_COMPONENTS:
        ax.plot(times, [getattr(s, attr) for s in snaps], lw=1.0, label=label)
    ax.plot(times, [s.total for s in snaps], "k-", lw=1.8, label="total")
    ax.set_xlabel("time")
    ax.set_ylabel("energy")
    ax.legend(fontsize=7, ncol=2)
    ax.set_title("stored energy per half step")
    fig.tight_layout()
    fig.savefig(outdir / "energy_trace.png", dpi=150)
    plt.close(fig)
    written.append("energy_trace.png")

    if ledger.entries:
        t_full = [e.time_full for e in ledger.entries]
        fig, ax = plt.subplots(figsize=(7, 4.2))
        budget = [e.energy_full.total + e.cumulative_dissipation for e in ledger.entries]
        ax.plot(t_full, [e.energy_full.total for e in ledger.entries], label="E")
        ax.plot(t_full, budget, label="E + cumulative dissipation")
        ax.axhline(ledger.initial_energy, color="k", ls="--", lw=1.0, label="initial energy")
        ax.set_xlabel("time")
        ax.set_ylabel("energy")
        ax.legend(fontsize=8)
        ax.set_title("dissipation-augmented energy bound")
        fig.tight_layout()
        fig.savefig(outdir / "energy_bound.png", dpi=150)
        plt.close(fig)
        written.append("energy_bound.png")

        fig, ax = plt.subplots(figsize=(7, 4.2))
        comps = [
            ("diss_viscous", "fluid viscous"),
            ("diss_viscoelastic_shear", "porous viscous (shear)"),
            ("diss_viscoelastic_bulk", "porous viscous (bulk)"),
            ("diss_darcy", "filtration"),
            ("diss_bjs", "interface slip"),
        ]
        plotted = False
        for attr, label in comps:
            vals = [getattr(e.coupled, attr) for e in ledger.entries]
            if any(v > 0 for v in vals):
                ax.semilogy(t_full, [max(v, 1e-300) for v in vals], label=label)
                plotted = True
        ax.set_xlabel("time")
        ax.set_ylabel("dissipation per step")
        if plotted:
            ax.legend(fontsize=8)
        ax.set_title("dissipation components")
        fig.tight_layout()
        fig.savefig(outdir / "dissipation.png", dpi=150)
        plt.close(fig)
        written.append("dissipation.png")

        fig, ax = plt.subplots(figsize=(7, 4.2))
        ax.semilogy(
            t_full,
            [max(e.plate.residual, 1e-18) for e in ledger.entries],
            "o-",
            ms=3,
            label="plate substep",
        )
        ax.semilogy(
            t_full,
            [max(e.coupled.identity_residual, 1e-18) for e in ledger.entries],
            "s-",
            ms=3,
            label="coupled substep",
        )
        ax.set_xlabel("time")
        ax.set_ylabel("relative identity residual")
        ax.legend(fontsize=8)
        ax.set_title("energy-identity residuals")
        fig.tight_layout()
        fig.savefig(outdir / "residuals.png", dpi=150)
        plt.close(fig)
        written.append("residuals.png")

    if monitors:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        t = [m.time for m in monitors]
        ax.plot(t, [m.plate_gap_min for m in monitors], label="plate gap")
        ax.plot(t, [m.interface_gap_min for m in monitors], label="interface gap")
        ax.plot(t, [m.jacobian_min for m in monitors], label="deformation Jacobian")
        tripped = [m for m in monitors if m.tripped]
        if tripped:
            ax.axvline(tripped[0].time, color="r", ls=":", label=f"trip: {tripped[0].violation}")
        ax.set_xlabel("time")
        ax.set_ylabel("monitored minimum")
        ax.legend(fontsize=8)
        ax.set_title("geometric validity monitors")
        fig.tight_layout()
        fig.savefig(outdir / "monitors.png", dpi=150)
        plt.close(fig)
        written.append("monitors.png")

    return written
