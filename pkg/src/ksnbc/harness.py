"""Configuration loading, experiment orchestration, and persistent outputs.

Configs are strict-keys TOML. Every run writes a manifest.json with a
config echo, timestamps, outcome and file checksums so a run can be
reproduced byte-for-byte from its own manifest.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from . import inequality_lab as lab
from . import model, monitors, stepper
from .errors import ConfigError, InsufficientSamplesError, ValidationError
from .grid import Field, Grid, load_field_csv, save_field_csv
from .operators import FluxSpec

DEFAULTS = {
    "T": 1.0,
    "dt_max": 1e-2,
    "dt_min": 1e-12,
    "cadence": 10,
    "blowup_cap": 1e6,
    "safety": 0.9,
    "solver": "dct",
    "flux": "power",
    "seed": 0,
    "out": "out",
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_USAGE = 64


@dataclass
class RunConfig:
    params: object  # ModelParams or NbcParams
    grid: Grid
    ic: dict
    ic_v: dict | None
    T: float
    controls: stepper.StepControls
    flux_kind: str
    out: Path
    seed: int
    raw: dict = field(default_factory=dict)


@dataclass
class SweepConfig:
    base: RunConfig
    p_values: list
    mu_values: list
    chi_values: list | None
    workers: int
    cap: int
    raw: dict = field(default_factory=dict)


@dataclass
class IneqConfig:
    lemmas: list
    resolutions: list
    spec: lab.EnsembleSpec
    r: float
    p: float
    eps: float
    eta: float
    out: Path
    raw: dict = field(default_factory=dict)


def _strict(section: dict, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _out_dir(run_sec: dict) -> Path:
    out = run_sec.get("out", DEFAULTS["out"])
    root = os.environ.get("KSNBC_OUT")
    return Path(root) / out if root else Path(out)


def _parse_grid(sec: dict) -> Grid:
    _strict(sec, {"cells", "extents"}, "grid")
    if "cells" not in sec:
        raise ConfigError("missing [grid] cells")
    cells = tuple(sec["cells"])
    extents = tuple(sec.get("extents", [1.0] * len(cells)))
    return Grid(extents=extents, cells=cells)


_IC_KEYS = {"kind", "center", "width", "amplitude", "k", "path"}


def _parse_ic(sec: dict, where: str) -> dict:
    _strict(sec, _IC_KEYS, where)
    kind = sec.get("kind")
    if kind not in ("constant", "gaussian-bump", "cosine-mode", "file"):
        raise ConfigError(f"unknown IC kind {kind!r} in [{where}]")
    return dict(sec)


def build_ic(grid: Grid, spec: dict | None) -> Field:
    if spec is None:
        return Field.zeros(grid)
    kind = spec["kind"]
    if kind == "constant":
        return Field.constant(grid, spec.get("amplitude", 1.0))
    if kind == "file":
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"IC file not found: {path}")
        return load_field_csv(grid, path)
    amp = float(spec.get("amplitude", 1.0))
    mesh = grid.meshgrid()
    if kind == "gaussian-bump":
        center = spec.get("center", [L / 2 for L in grid.extents])
        width = float(spec.get("width", 0.1 * min(grid.extents)))
        r2 = sum((x - c) ** 2 for x, c in zip(mesh, center))
        vals = amp * np.exp(-r2 / (2.0 * width**2))
    else:  # cosine-mode: nonnegative bump amp*(1+cos(k pi x/L))/2 per axis
        k = int(spec.get("k", 1))
        vals = np.full(grid.shape(), amp)
        for x, L in zip(mesh, grid.extents):
            vals = vals * (1.0 + np.cos(k * math.pi * x / L)) / 2.0
    if vals.min() < 0:
        raise ConfigError("initial condition must be nonnegative")
    return Field(grid, vals)


def _parse_controls(sec: dict) -> stepper.StepControls:
    return stepper.StepControls(
        dt_min=float(sec.get("dt_min", DEFAULTS["dt_min"])),
        dt_max=float(sec.get("dt_max", DEFAULTS["dt_max"])),
        fixed_dt=(float(sec["fixed_dt"]) if "fixed_dt" in sec else None),
        safety=float(sec.get("safety", DEFAULTS["safety"])),
        blowup_cap=float(sec.get("blowup_cap", DEFAULTS["blowup_cap"])),
        solver_backend=sec.get("solver", DEFAULTS["solver"]),
        cadence=int(sec.get("cadence", DEFAULTS["cadence"])),
    )


_RUN_KEYS = {"T", "dt_max", "dt_min", "fixed_dt", "cadence", "blowup_cap",
             "safety", "solver", "flux", "seed", "out"}


def load_config(path) -> RunConfig | SweepConfig | IneqConfig:
    """Parse and validate a TOML config; defaults filled and echoed."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from exc
    if "sweep" in doc:
        return _load_sweep(doc)
    if "ineq" in doc:
        return _load_ineq(doc)
    return _load_run(doc)


def _load_run(doc: dict) -> RunConfig:
    _strict(doc, {"model", "nbc", "grid", "ic", "ic_v", "run"}, "top level")
    if ("model" in doc) == ("nbc" in doc):
        raise ConfigError("config needs exactly one of [model] or [nbc]")
    grid = _parse_grid(doc.get("grid", {}))
    run_sec = dict(doc.get("run", {}))
    _strict(run_sec, _RUN_KEYS, "run")
    if "model" in doc:
        try:
            params = model.validate(doc["model"])
        except ValidationError as exc:
            raise ConfigError(f"invalid [model]: {exc}") from exc
    else:
        try:
            params = model.validate_nbc(doc["nbc"])
        except ValidationError as exc:
            raise ConfigError(f"invalid [nbc]: {exc}") from exc
    ic = _parse_ic(doc.get("ic", {"kind": "constant", "amplitude": 1.0}), "ic")
    ic_v = _parse_ic(doc["ic_v"], "ic_v") if "ic_v" in doc else None
    flux_kind = run_sec.get("flux", DEFAULTS["flux"])
    if flux_kind not in ("power", "homogeneous"):
        raise ConfigError(f"unknown flux mode {flux_kind!r}")
    echo = dict(doc)
    echo.setdefault("run", {})
    for key in ("T", "dt_max", "cadence", "blowup_cap", "flux", "seed", "out"):
        echo["run"].setdefault(key, run_sec.get(key, DEFAULTS[key]))
    return RunConfig(
        params=params,
        grid=grid,
        ic=ic,
        ic_v=ic_v,
        T=float(run_sec.get("T", DEFAULTS["T"])),
        controls=_parse_controls(run_sec),
        flux_kind=flux_kind,
        out=_out_dir(run_sec),
        seed=int(run_sec.get("seed", DEFAULTS["seed"])),
        raw=echo,
    )


def _load_sweep(doc: dict) -> SweepConfig:
    _strict(doc, {"model", "grid", "ic", "ic_v", "run", "sweep"}, "top level")
    sweep_sec = dict(doc["sweep"])
    _strict(sweep_sec, {"p", "mu", "chi", "workers", "cap"}, "sweep")
    base_doc = {k: v for k, v in doc.items() if k != "sweep"}
    base = _load_run(base_doc)
    p_values = list(sweep_sec.get("p", [base.params.p]))
    mu_values = list(sweep_sec.get("mu", [base.params.mu]))
    chi_values = list(sweep_sec["chi"]) if "chi" in sweep_sec else None
    if not p_values or not mu_values:
        raise ConfigError("sweep axes must be non-empty")
    cap = int(sweep_sec.get("cap", 256))
    n_cells = len(p_values) * len(mu_values) * (len(chi_values) if chi_values else 1)
    if n_cells > cap:
        raise ConfigError(f"sweep size {n_cells} exceeds cap {cap}")
    return SweepConfig(
        base=base,
        p_values=p_values,
        mu_values=mu_values,
        chi_values=chi_values,
        workers=int(sweep_sec.get("workers", 1)),
        cap=cap,
        raw=doc,
    )


def _load_ineq(doc: dict) -> IneqConfig:
    _strict(doc, {"ineq", "run"}, "top level")
    sec = dict(doc["ineq"])
    _strict(sec, {"lemmas", "resolutions", "count", "seed", "max_wavenumber",
                  "amplitude", "bump_fraction", "r", "p", "eps", "eta"}, "ineq")
    run_sec = dict(doc.get("run", {}))
    _strict(run_sec, {"out"}, "run")
    spec = lab.EnsembleSpec(
        seed=int(sec.get("seed", 0)),
        count=int(sec.get("count", 50)),
        max_wavenumber=int(sec.get("max_wavenumber", 6)),
        amplitude=float(sec.get("amplitude", 1.0)),
        bump_fraction=float(sec.get("bump_fraction", 0.25)),
    )
    return IneqConfig(
        lemmas=list(sec.get("lemmas", ["gny", "boundary_trace", "boundary_reg"])),
        resolutions=[tuple(rr) for rr in sec.get("resolutions", [[64, 64]])],
        spec=spec,
        r=float(sec.get("r", 1.0)),
        p=float(sec.get("p", 1.25)),
        eps=float(sec.get("eps", 0.5)),
        eta=float(sec.get("eta", 0.1)),
        out=_out_dir(run_sec),
        raw=doc,
    )


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out: Path, cfg_echo: dict, outcome, extra: dict):
    files = {}
    for fp in sorted(out.rglob("*")):
        if fp.is_file() and fp.name != "manifest.json":
            files[str(fp.relative_to(out))] = _sha256(fp)
    manifest = {
        "config": cfg_echo,
        "version": __version__,
        "outcome": None if outcome is None else {
            "status": outcome.status, "t": outcome.t, "steps": outcome.steps,
            "wall_time": outcome.wall_time, "detail": outcome.detail,
        },
        "files": files,
        **extra,
    }
    tmp = out / "manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    tmp.replace(out / "manifest.json")  # atomic on POSIX
    return manifest


def compatibility_residual(u0: Field, p: float) -> float:
    """max over boundary faces of |outward du0/dnu - trace(u0)^p|.

    Bump and constant initial data violate the first-order compatibility
    condition at t=0; the residual is recorded for transparency.
    """
    from .grid import boundary_traces

    worst = 0.0
    traces = list(boundary_traces(u0))
    for (tr, _area), (axis, _sign, outer, inner, _a) in zip(
        traces, u0.grid.boundary_sides()
    ):
        deriv = (u0.values[outer] - u0.values[inner]) / u0.grid.h[axis]
        worst = max(worst, float(np.max(np.abs(
            np.atleast_1d(deriv) - np.abs(tr) ** p
        ))))
    return worst


def execute_run(cfg: RunConfig, snapshots: bool = True):
    """Run one experiment and write series.csv, snapshots and manifest."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    u0 = build_ic(cfg.grid, cfg.ic)
    is_nbc = isinstance(cfg.params, model.NbcParams)
    p_exp = cfg.params.P if is_nbc else cfg.params.p
    flux = (FluxSpec.power_law(p_exp) if cfg.flux_kind == "power"
            else FluxSpec.homogeneous())
    snap_dir = out / "snapshots"
    if snapshots:
        snap_dir.mkdir(exist_ok=True)
        save_field_csv(u0, snap_dir / "u_t0.csv")
    if is_nbc:
        outcome, series = stepper.run_nbc(cfg.params, cfg.grid, u0, cfg.T,
                                          cfg.controls, flux)
        final_state = None
    else:
        v0 = build_ic(cfg.grid, cfg.ic_v)
        outcome, series, final_state = stepper.run_with_state(
            cfg.params, cfg.grid, (u0, v0), cfg.T, cfg.controls, flux
        )
        if snapshots and final_state is not None:
            save_field_csv(final_state.u, snap_dir / "u_final.csv")
            save_field_csv(final_state.v, snap_dir / "v_final.csv")
    series.write_csv(out / "series.csv")
    extra = {
        "started": started,
        "finished": time.time(),
        "compatibility_residual": (
            compatibility_residual(u0, p_exp) if cfg.flux_kind == "power" else 0.0
        ),
    }
    if not is_nbc:
        cls = model.classify_regime(cfg.params)
        extra["classification"] = {
            "verdict": cls.verdict, "citation": cls.citation,
            "thresholds": cls.thresholds, "note": cls.note,
        }
    _write_manifest(out, cfg.raw, outcome, extra)
    return outcome, series


SWEEP_COLUMNS = ("p", "mu", "chi", "outcome", "classification",
                 "verdict_sup_u", "verdict_llogl", "verdict_phi",
                 "sup_sup_u", "sup_llogl", "sup_phi", "wall_time", "error")


def _sweep_cell(args):
    base, p, mu, chi = args
    row = {"p": p, "mu": mu, "chi": chi}
    try:
        params = model.validate({
            "chi": chi, "a": base.params.a, "mu": mu,
            "alpha": base.params.alpha, "beta": base.params.beta,
            "tau": base.params.tau, "p": p, "dim": base.params.dim,
        }, exploration=True)
        cls = model.classify_regime(params)
        row["classification"] = cls.verdict
        u0 = build_ic(base.grid, base.ic)
        v0 = build_ic(base.grid, base.ic_v)
        flux = (FluxSpec.power_law(p) if base.flux_kind == "power"
                else FluxSpec.homogeneous())
        outcome, series = stepper.run(params, base.grid, (u0, v0), base.T,
                                      base.controls, flux)
        row["outcome"] = outcome.status
        row["wall_time"] = outcome.wall_time
        blown = outcome.status == stepper.BLOW_UP
        for name in ("sup_u", "llogl", "phi"):
            try:
                v = monitors.verdict(series, name, blown_up=blown,
                                     blowup_cap=base.controls.blowup_cap)
                row[f"verdict_{name}"] = v.status
                row[f"sup_{name}"] = v.sup
            except InsufficientSamplesError:
                row[f"verdict_{name}"] = "n/a"
                row[f"sup_{name}"] = float(np.max(series.column(name))) if series.rows else float("nan")
        row["error"] = ""
    except Exception as exc:  # a failed cell must not abort the sweep
        row.setdefault("outcome", "Error")
        row["error"] = str(exc)
    for col in SWEEP_COLUMNS:
        row.setdefault(col, "")
    return row


def execute_sweep(cfg: SweepConfig):
    """Run every (p, mu[, chi]) cell and assemble sweep.csv."""
    out = cfg.base.out
    out.mkdir(parents=True, exist_ok=True)
    chis = cfg.chi_values or [cfg.base.params.chi]
    cells = [(cfg.base, p, mu, chi)
             for p in cfg.p_values for mu in cfg.mu_values for chi in chis]
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in SWEEP_COLUMNS) + "\n")
    _write_manifest(out, cfg.raw, None, {"cells": len(rows)})
    return rows


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def execute_ineq(cfg: IneqConfig):
    """Run the configured inequality campaigns across resolutions; one CSV
    report per lemma."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for lemma in cfg.lemmas:
        rows = []
        for cells in cfg.resolutions:
            grid = Grid(extents=(1.0,) * len(cells), cells=cells)
            fields = lab.generate_ensemble(grid, cfg.spec)
            if lemma == "gny":
                rep = lab.check_gny(fields, cfg.eta if cfg.eta < 1 else 0.5)
            elif lemma == "boundary_trace":
                rep = lab.check_boundary_trace(fields, cfg.r, cfg.p, cfg.eps)
            elif lemma == "boundary_reg":
                rep = lab.check_boundary_reg(fields, cfg.r, cfg.p,
                                             min(cfg.eta, 0.4))
            elif lemma == "unif_gn":
                rep = lab.check_unif_gn_2d(fields, cfg.r, max(cfg.p, cfg.r + 0.1),
                                           cfg.eta)
            elif lemma == "convexity":
                worst = max(lab.check_convexity_sign(f) for f in fields)
                rep = lab.ConstantFitReport("convexity", worst, -1, {})
            else:
                raise ConfigError(f"unknown lemma {lemma!r}")
            rows.append((cells, rep))
        results[lemma] = rows
        with open(out / f"ineq_{lemma}.csv", "w") as fh:
            fh.write("lemma,resolution,fitted,attaining_index,params\n")
            for cells, rep in rows:
                fh.write(f"{rep.lemma_id},{'x'.join(map(str, cells))},"
                         f"{rep.fitted:.17g},{rep.attaining_index},"
                         f"\"{rep.params}\"\n")
    _write_manifest(out, cfg.raw, None, {"lemmas": cfg.lemmas})
    return results


def report_dir(path) -> dict:
    """Summarize a run directory: outcome plus monitor verdicts."""
    out = Path(path)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {out}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    summary = {"outcome": manifest.get("outcome"),
               "classification": manifest.get("classification")}
    series_path = out / "series.csv"
    if series_path.exists():
        series = monitors.MonitorSeries.read_csv(series_path)
        blown = (manifest.get("outcome") or {}).get("status") == stepper.BLOW_UP
        verdicts = {}
        for name in ("sup_u", "mass", "llogl", "gradv2", "phi", "psi"):
            try:
                v = monitors.verdict(series, name, blown_up=blown)
                verdicts[name] = {"status": v.status, "sup": v.sup,
                                  "tail_slope": v.tail_slope}
            except InsufficientSamplesError:
                verdicts[name] = {"status": "n/a"}
        summary["verdicts"] = verdicts
    return summary
