"""Render static figures from the simulator's CSV outputs.

Consumes only the documented CSV schemas (series.csv, sweep.csv); inputs
are never modified. Figures are deterministic given fixed style options.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SERIES_COLUMNS = ("t", "mass", "l1", "l2", "l4", "llogl", "gradv2", "gradv4",
                  "phi", "psi", "sup_u", "boundary_influx", "dt")
SWEEP_COLUMNS = ("p", "mu", "chi", "outcome", "classification",
                 "verdict_sup_u", "verdict_llogl", "verdict_phi",
                 "sup_sup_u", "sup_llogl", "sup_phi", "wall_time", "error")

SERIES_PANELS = ("sup_u", "mass", "llogl", "gradv2", "phi", "psi")

P_CRITICAL = 1.5
P_CRITICAL_3D = 1.4

OUTCOME_COLORS = {
    "Completed": "#2b8cbe",
    "BlowUp": "#d7301f",
    "NegativityFailure": "#fdbb84",
    "SolverFailure": "#969696",
    "Error": "#636363",
}


class SchemaMismatch(Exception):
    """Input CSV does not carry the expected columns."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"missing column(s): {', '.join(self.missing)}")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw and where to put it."""

    inputs: tuple
    kind: str  # series-panel | phase-diagram | ladder-plot
    output: Path
    log_y: bool = False
    colormap: str = "viridis"
    # phase-diagram overlays for the 3D evolving-signal regime
    show_3d_thresholds: bool = False
    mu0: float | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("series-panel", "phase-diagram", "ladder-plot"):
            raise ValueError(f"unknown figure kind {self.kind!r}")


def _read_csv(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaMismatch(missing)
        rows = list(reader)
    return header, rows


def load_series(path) -> dict:
    """Read series.csv into {column: float array}."""
    _header, rows = _read_csv(path, SERIES_COLUMNS)
    return {c: np.array([float(r[c]) for r in rows]) for c in SERIES_COLUMNS}


def load_sweep(path) -> list:
    """Read sweep.csv into a list of row dicts (numeric fields parsed)."""
    _header, rows = _read_csv(path, SWEEP_COLUMNS)
    out = []
    for r in rows:
        row = dict(r)
        for key in ("p", "mu", "chi", "sup_sup_u", "sup_llogl", "sup_phi",
                    "wall_time"):
            try:
                row[key] = float(r[key])
            except (ValueError, TypeError):
                row[key] = float("nan")
        out.append(row)
    return out


def plot_series(path, spec: FigureSpec) -> Path:
    """Six-panel monitor figure: sup_u, mass, llogl, gradv2, phi, psi vs t,
    with the boundary influx on a twin axis of the mass panel.

    A single-sample series (T = 0 run) renders as markers."""
    data = load_series(path)
    t = data["t"]
    markers = dict(marker="o", markersize=3) if len(t) < 2 else {}
    fig, axes = plt.subplots(2, 3, figsize=(12, 6.5), sharex=True)
    for ax, name in zip(axes.flat, SERIES_PANELS):
        ax.plot(t, data[name], color="#2b8cbe", lw=1.2, **markers)
        ax.set_title(name)
        ax.grid(alpha=0.3)
        if spec.log_y:
            ax.set_yscale("log")
        if name == "mass":
            twin = ax.twinx()
            twin.plot(t, data["boundary_influx"], color="#d7301f", lw=0.9,
                      alpha=0.7, **markers)
            twin.set_ylabel("boundary_influx", color="#d7301f", fontsize=8)
            twin.tick_params(axis="y", labelcolor="#d7301f", labelsize=7)
    for ax in axes[-1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    out = Path(spec.output)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_phase(path, spec: FigureSpec) -> Path:
    """(p, mu) heatmap colored by run outcome, with the critical boundary
    exponent p = 3/2 overlaid (and p = 7/5 plus the explicit damping
    threshold when the 3D evolving-signal overlays are requested)."""
    rows = load_sweep(path)
    ps = sorted({r["p"] for r in rows})
    mus = sorted({r["mu"] for r in rows})
    if len(ps) < 2 or len(mus) < 2:
        raise ValueError("phase diagram needs at least a 2x2 sweep")
    outcomes = sorted({r["outcome"] for r in rows})
    code = {name: i for i, name in enumerate(outcomes)}
    grid = np.full((len(mus), len(ps)), np.nan)
    for r in rows:
        grid[mus.index(r["mu"]), ps.index(r["p"])] = code[r["outcome"]]
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = [OUTCOME_COLORS.get(name, "#bdbdbd") for name in outcomes]
    cmap = matplotlib.colors.ListedColormap(colors)
    pe = _edges(ps)
    me = _edges(mus)
    mesh = ax.pcolormesh(pe, me, grid, cmap=cmap, vmin=-0.5,
                         vmax=len(outcomes) - 0.5)
    cbar = fig.colorbar(mesh, ticks=range(len(outcomes)))
    cbar.ax.set_yticklabels(outcomes)
    ax.axvline(P_CRITICAL, color="k", ls="--", lw=1.2,
               label=f"p = {P_CRITICAL}")
    if spec.show_3d_thresholds:
        ax.axvline(P_CRITICAL_3D, color="k", ls=":", lw=1.2,
                   label=f"p = {P_CRITICAL_3D}")
        if spec.mu0 is not None:
            ax.axhline(spec.mu0, color="#54278f", ls="-.", lw=1.2,
                       label=f"mu0 = {spec.mu0:g}")
    ax.set_xlabel("p")
    ax.set_ylabel("mu")
    ax.set_title("outcome phase diagram")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    out = Path(spec.output)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_ladder(path, spec: FigureSpec) -> Path:
    """Norm-cascade view of a series: l1 <= l2 <= l4 <= sup_u over time."""
    data = load_series(path)
    t = data["t"]
    markers = dict(marker="o", markersize=3) if len(t) < 2 else {}
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, color in (("l1", "#a6bddb"), ("l2", "#74a9cf"),
                        ("l4", "#2b8cbe"), ("sup_u", "#045a8d")):
        ax.plot(t, data[name], color=color, lw=1.2, label=name, **markers)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(spec.output)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _edges(vals):
    vals = np.asarray(vals, dtype=float)
    mids = 0.5 * (vals[1:] + vals[:-1])
    first = vals[0] - (mids[0] - vals[0])
    last = vals[-1] + (vals[-1] - mids[-1])
    return np.concatenate([[first], mids, [last]])


def render(spec: FigureSpec) -> Path:
    """Dispatch on the figure kind."""
    (path,) = spec.inputs
    if spec.kind == "series-panel":
        return plot_series(path, spec)
    if spec.kind == "phase-diagram":
        return plot_phase(path, spec)
    return plot_ladder(path, spec)
