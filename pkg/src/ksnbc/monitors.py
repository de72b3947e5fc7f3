"""Trajectory functionals, boundedness verdicts, the norm-ladder
diagnostic, and Gronwall envelope checks.

The theory only asserts that these functionals stay bounded; the monitors
therefore report empirical suprema and tail slopes instead of comparing
against unknown constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InsufficientSamplesError, KsnbcError, NonFiniteFieldError
from .grid import (
    Field,
    boundary_integral_pow,
    cell_gradient_sq,
    grad_sq_integral,
    integrate,
    lp_norm,
)

COLUMNS = ("t", "mass", "l1", "l2", "l4", "llogl", "gradv2", "gradv4",
           "phi", "psi", "sup_u", "boundary_influx", "dt")

LOG_GUARD = 1e-300

BOUNDED = "Bounded"
GROWING = "Growing"
BLOWN_UP = "BlownUp"


class LadderOverflowError(KsnbcError):
    """Norm ladder exceeded log-domain range."""


@dataclass
class MonitorSeries:
    """Time-stamped values of every tracked functional."""

    rows: list = field(default_factory=list)

    @property
    def times(self):
        return [r["t"] for r in self.rows]

    def append(self, record: dict):
        if self.rows and record["t"] <= self.rows[-1]["t"]:
            raise ValueError("sample times must be strictly increasing")
        self.rows.append(record)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(name)
        return np.array([r[name] for r in self.rows])

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(f"{r[c]:.17g}" for c in COLUMNS) + "\n")

    @classmethod
    def read_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        series = cls()
        for row in data:
            series.rows.append({c: float(row[c]) for c in COLUMNS})
        return series


@dataclass(frozen=True)
class Verdict:
    status: str
    sup: float
    tail_slope: float


def sample(state, p_exponent: float, flux=None) -> dict:
    """Evaluate all tracked functionals on the current (u, v, t, dt)."""
    u, v = state.u, state.v
    if not (u.is_finite() and v.is_finite()):
        raise NonFiniteFieldError("monitor sample on non-finite state")
    uvals = u.values
    gv2_cells = cell_gradient_sq(v)  # single reconstruction used everywhere
    int_u2 = integrate(Field(u.grid, uvals**2))
    gradv4 = integrate(Field(u.grid, gv2_cells.values**2))
    cross = integrate(Field(u.grid, uvals * gv2_cells.values))
    flux_on = flux is not None and getattr(flux, "kind", "power") == "power"
    influx = boundary_integral_pow(u, p_exponent) if flux_on else 0.0
    return {
        "t": state.t,
        "mass": integrate(u),
        "l1": lp_norm(u, 1),
        "l2": lp_norm(u, 2),
        "l4": lp_norm(u, 4),
        "llogl": integrate(Field(u.grid, (uvals + 1.0) * np.log(uvals + 1.0))),
        "gradv2": grad_sq_integral(v),
        "gradv4": gradv4,
        "phi": 0.5 * int_u2 + 0.25 * gradv4,
        "psi": int_u2 + gradv4 + cross / 3.0,
        "sup_u": u.max(),
        "boundary_influx": influx,
        "dt": state.dt,
    }


def verdict(series: MonitorSeries, functional: str, window: float = 0.5,
            slope_tol: float = 1e-3, blowup_cap: float = 1e6,
            blown_up: bool = False) -> Verdict:
    """Fit log(value + guard) vs t on the trailing window.

    Bounded if the slope is at most slope_tol per unit time and the sampled
    sup stays below the cap; Growing otherwise; BlownUp when the run's
    outcome was a blow-up, regardless of slope.
    """
    if len(series.rows) < 16:
        raise InsufficientSamplesError(
            f"verdict needs >= 16 samples, got {len(series.rows)}"
        )
    t = series.column("t")
    y = series.column(functional)
    sup = float(np.max(y))
    n_tail = max(2, int(np.ceil(len(t) * window)))
    tt, yy = t[-n_tail:], y[-n_tail:]
    slope = float(np.polyfit(tt, np.log(np.abs(yy) + LOG_GUARD), 1)[0])
    if blown_up:
        return Verdict(BLOWN_UP, sup, slope)
    if slope <= slope_tol and sup < blowup_cap:
        return Verdict(BOUNDED, sup, slope)
    return Verdict(GROWING, sup, slope)


def moser_ladder(u: Field, r0: float, K: int) -> np.ndarray:
    """Norms ||u||_{2^k r0} for k = 0..K on the volume-normalized domain.

    Log-domain evaluation; rungs are non-decreasing (Jensen on a
    probability measure) and climb toward max |u|.
    """
    if not r0 > u.grid.dim / 2:
        raise ValueError(f"need r0 > dim/2 = {u.grid.dim / 2}, got {r0}")
    if K > 8:
        raise ValueError(f"ladder capped at K = 8 levels, got {K}")
    if not u.is_finite():
        raise NonFiniteFieldError("ladder input non-finite")
    absu = np.abs(u.values).ravel()
    if absu.max() == 0.0:
        return np.zeros(K + 1)
    n_cells = absu.size
    log_w = -np.log(n_cells)  # uniform weights on the normalized measure
    with np.errstate(divide="ignore"):
        log_absu = np.log(absu)
    rungs = np.empty(K + 1)
    for k in range(K + 1):
        r = r0 * 2.0**k
        log_norm = (logsumexp(r * log_absu) + log_w) / r
        if not np.isfinite(log_norm):
            raise LadderOverflowError(f"rung k={k} exceeded log-domain range")
        rungs[k] = np.exp(log_norm)
    return rungs


@dataclass(frozen=True)
class GronwallReport:
    sup_forcing: float
    envelope_ok: bool
    max_violation: float
    violations: tuple


def gronwall_report(series: MonitorSeries, functional: str, lam: float,
                    envelope_tol: float = 1e-8) -> GronwallReport:
    """Reconstruct the forcing c(t) = y' + lam*y by centered differences and
    verify the decay envelope y(t) <= e^{-lam t} y(0) + sup(c)/lam (1 - e^{-lam t}).

    A violation flags non-smooth monitor behavior (e.g. a jump in the series).
    """
    if lam <= 0:
        raise ValueError(f"need lam > 0, got {lam}")
    if len(series.rows) < 3:
        raise InsufficientSamplesError("gronwall_report needs >= 3 samples")
    t = series.column("t")
    y = series.column(functional)
    dy = np.gradient(y, t)
    forcing = dy + lam * y
    sup_c = float(np.max(forcing))
    envelope = np.exp(-lam * (t - t[0])) * y[0] + (sup_c / lam) * (
        1.0 - np.exp(-lam * (t - t[0]))
    )
    excess = y - envelope - envelope_tol * max(1.0, float(np.max(np.abs(y))))
    bad = np.nonzero(excess > 0)[0]
    return GronwallReport(
        sup_forcing=sup_c,
        envelope_ok=bad.size == 0,
        max_violation=float(excess.max()) if bad.size else 0.0,
        violations=tuple(int(i) for i in bad),
    )
