"""IMEX time integration for the chemotaxis system and the scalar
boundary-flux problem, with adaptive step control and terminal-state
detection.

Diffusion and the linear signal terms are implicit (one SPD solve each);
chemotaxis, logistic reaction, and the nonlinear boundary flux are
explicit. First order in time.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import monitors
from .errors import (
    KsnbcError,
    NegativityFailure,
    NoConvergenceError,
    NonFiniteFieldError,
    SolverFailure,
)
from .grid import Field, Grid, boundary_integral_pow, face_differences, integrate
from .model import ModelParams, NbcParams
from .operators import (
    FluxSpec,
    boundary_flux_source,
    chemo_divergence,
    helmholtz_solve,
)

COMPLETED = "Completed"
BLOW_UP = "BlowUp"
NEGATIVITY_FAILURE = "NegativityFailure"
SOLVER_FAILURE = "SolverFailure"

# dt is snapped down onto the grid dt_max * DT_RATIO^-k so the implicit
# factorization cache stays small while losing at most ~19% of the step.
DT_RATIO = 2.0 ** 0.25


@dataclass(frozen=True)
class StepControls:
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    fixed_dt: float | None = None
    safety: float = 0.9
    negativity_tol_rel: float = 1e-8
    # densities are nonnegative; disable only for signed test data
    enforce_nonnegativity: bool = True
    blowup_cap: float = 1e6
    solver_backend: str = "dct"
    solver_tol: float = 1e-10
    cadence: int = 10
    diffusion_guard_relax: float = 10.0


@dataclass
class SimState:
    u: Field
    v: Field
    t: float
    dt: float
    step_count: int = 0
    last_reports: tuple = ()
    last_stats: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunOutcome:
    status: str
    t: float
    steps: int
    wall_time: float
    detail: dict = field(default_factory=dict)

    @property
    def completed(self):
        return self.status == COMPLETED


def _implicit_diffusion(u: Field, dt: float, explicit: np.ndarray, controls: StepControls):
    """Solve (I - dt lap) u_new = u + dt * explicit."""
    sigma = 1.0 / dt
    rhs = Field(u.grid, u.values * sigma + explicit)
    return helmholtz_solve(rhs, sigma, tol=controls.solver_tol,
                           backend=controls.solver_backend)


def _check_negativity(u: Field, t: float, controls: StepControls):
    if not controls.enforce_nonnegativity:
        return
    lo = u.min()
    tol = controls.negativity_tol_rel * max(abs(u.max()), 1.0)
    if lo < -tol:
        raise NegativityFailure(t, lo)


def _u_update(state, params, flux, dt, v_new, controls):
    u = state.u
    explicit = (
        -params.chi * chemo_divergence(u, v_new).values
        + params.a * u.values
        - params.mu * u.values**2
    )
    influx_src = boundary_flux_source(u, flux)
    explicit = explicit + influx_src.values
    u_new, rep_u = _implicit_diffusion(u, dt, explicit, controls)
    _check_negativity(u_new, state.t + dt, controls)
    stats = {
        "mass_before": integrate(u),
        "mass_after": integrate(u_new),
        "reaction_integral": integrate(
            Field(u.grid, params.a * u.values - params.mu * u.values**2)
        ),
        "boundary_influx": integrate(influx_src),
        "dt": dt,
    }
    return u_new, rep_u, stats


def step_parabolic_elliptic(state: SimState, params: ModelParams, dt: float,
                            flux: FluxSpec, controls: StepControls = StepControls()) -> SimState:
    """One step of the quasi-static system: elliptic signal solve, then an
    IMEX density update."""
    v_new, rep_v = helmholtz_solve(
        Field(state.u.grid, params.alpha * state.u.values),
        params.beta, tol=controls.solver_tol, backend=controls.solver_backend,
    )
    u_new, rep_u, stats = _u_update(state, params, flux, dt, v_new, controls)
    return SimState(u=u_new, v=v_new, t=state.t + dt, dt=dt,
                    step_count=state.step_count + 1,
                    last_reports=(rep_v, rep_u), last_stats=stats)


def step_parabolic_parabolic(state: SimState, params: ModelParams, dt: float,
                             flux: FluxSpec, controls: StepControls = StepControls()) -> SimState:
    """One step of the evolving-signal system: implicit signal update, then
    the density update against the new signal."""
    sigma = (1.0 + dt * params.beta) / dt
    rhs = Field(state.v.grid, (state.v.values + dt * params.alpha * state.u.values) / dt)
    v_new, rep_v = helmholtz_solve(rhs, sigma, tol=controls.solver_tol,
                                   backend=controls.solver_backend)
    u_new, rep_u, stats = _u_update(state, params, flux, dt, v_new, controls)
    return SimState(u=u_new, v=v_new, t=state.t + dt, dt=dt,
                    step_count=state.step_count + 1,
                    last_reports=(rep_v, rep_u), last_stats=stats)


def step_nbc(state: SimState, nbc: NbcParams, dt: float,
             flux: FluxSpec | None = None,
             controls: StepControls = StepControls()) -> SimState:
    """One step of the scalar problem: implicit diffusion, explicit
    -mu U^Q damping and boundary influx U^P."""
    if flux is None:
        flux = FluxSpec.power_law(nbc.P)
    u = state.u
    influx_src = boundary_flux_source(u, flux)
    explicit = -nbc.mu * np.abs(u.values) ** nbc.Q + influx_src.values
    u_new, rep = _implicit_diffusion(u, dt, explicit, controls)
    _check_negativity(u_new, state.t + dt, controls)
    stats = {
        "mass_before": integrate(u),
        "mass_after": integrate(u_new),
        "reaction_integral": integrate(Field(u.grid, -nbc.mu * np.abs(u.values) ** nbc.Q)),
        "boundary_influx": integrate(influx_src),
        "dt": dt,
    }
    return SimState(u=u_new, v=state.v, t=state.t + dt, dt=dt,
                    step_count=state.step_count + 1,
                    last_reports=(rep,), last_stats=stats)


def _quantize_dt(dt: float, controls: StepControls) -> float:
    """Largest dt_max * DT_RATIO^-k that is <= dt."""
    if dt >= controls.dt_max:
        return controls.dt_max
    k = math.ceil(math.log(controls.dt_max / dt) / math.log(DT_RATIO) - 1e-12)
    return controls.dt_max * DT_RATIO ** (-k)


def adapt_dt(state: SimState, params, controls: StepControls,
             flux: FluxSpec | None = None) -> float:
    """Rate-limited step size, clamped to [dt_min, dt_max].

    Implicit diffusion removes the hard diffusion CFL; it is retained at
    10x relaxation as a truncation-error guard.
    """
    if controls.fixed_dt is not None:
        return min(max(controls.fixed_dt, controls.dt_min), controls.dt_max)
    grid = state.u.grid
    hmin = min(grid.h)
    guard = controls.diffusion_guard_relax * hmin**2 / (2.0 * grid.dim)
    rate = 0.0
    max_u = max(state.u.max(), 0.0)
    if isinstance(params, NbcParams):
        rate += nbc_damping_rate(params, max_u)
        p, chi, a, mu = params.P, 0.0, 0.0, 0.0
    else:
        p, chi, a, mu = params.p, params.chi, params.a, params.mu
        rate += a + mu * max_u
    if chi != 0.0:
        gmax = 0.0
        for axis in range(grid.dim):
            d = face_differences(state.v, axis)
            if d.size:
                gmax = max(gmax, float(np.abs(d).max()))
        rate += abs(chi) * gmax / hmin
    if flux is not None and flux.kind == "power" and max_u > 0:
        rate += flux.exponent * max_u ** (flux.exponent - 1.0) * (
            grid.boundary_measure / grid.volume
        )
    limit = guard if rate == 0.0 else min(guard, 1.0 / rate)
    dt = _quantize_dt(controls.safety * limit, controls)
    return min(max(dt, controls.dt_min), controls.dt_max)


def nbc_damping_rate(nbc: NbcParams, max_u: float) -> float:
    if max_u <= 0:
        return 0.0
    return nbc.mu * nbc.Q * max_u ** (nbc.Q - 1.0)


def _terminal_outcome(exc, t, steps, wall):
    if isinstance(exc, NegativityFailure):
        return RunOutcome(NEGATIVITY_FAILURE, t, steps, wall,
                          {"t": exc.t, "min_u": exc.min_u})
    if isinstance(exc, (NoConvergenceError, NonFiniteFieldError, SolverFailure)):
        return RunOutcome(SOLVER_FAILURE, t, steps, wall, {"error": str(exc)})
    raise exc


def run(params: ModelParams, grid: Grid, initial, T: float,
        controls: StepControls = StepControls(),
        flux: FluxSpec | None = None):
    """Advance the chemotaxis system to t = T or a terminal status.

    `initial` is (u0, v0); v0 is ignored for tau = 0 (the signal is slaved
    to the density). Returns (RunOutcome, MonitorSeries).
    """
    outcome, series, _ = run_with_state(params, grid, initial, T, controls, flux)
    return outcome, series


def run_nbc(nbc: NbcParams, grid: Grid, u0: Field, T: float,
            controls: StepControls = StepControls(),
            flux: FluxSpec | None = None):
    """Advance the scalar boundary-flux problem. Returns
    (RunOutcome, MonitorSeries) with signal monitors identically zero."""
    if flux is None:
        flux = FluxSpec.power_law(nbc.P)
    start = time.perf_counter()
    state = SimState(u=u0.copy(), v=Field.zeros(grid), t=0.0, dt=controls.dt_max)

    def step_fn(st, p, dt, fl, ctl):
        return step_nbc(st, p, dt, fl, ctl)

    outcome, series, _ = _drive(state, nbc, T, controls, flux, step_fn,
                                monitor_p=nbc.P, start=start)
    return outcome, series


def _drive(state, params, T, controls, flux, step_fn, monitor_p, start):
    series = monitors.MonitorSeries()
    series.append(monitors.sample(state, monitor_p, flux))
    steps = 0
    pinned = 0
    prev_max = state.u.max()
    while state.t < T:
        dt = adapt_dt(state, params, controls, flux)
        dt = min(dt, T - state.t)
        try:
            state = step_fn(state, params, dt, flux, controls)
        except KsnbcError as exc:
            wall = time.perf_counter() - start
            return _terminal_outcome(exc, state.t, steps, wall), series, state
        steps += 1
        max_u = state.u.max()
        if not state.u.is_finite() or not state.v.is_finite():
            wall = time.perf_counter() - start
            return RunOutcome(SOLVER_FAILURE, state.t, steps, wall,
                              {"error": "non-finite state"}), series, state
        if max_u > controls.blowup_cap:
            series.append(monitors.sample(state, monitor_p, flux))
            wall = time.perf_counter() - start
            return RunOutcome(BLOW_UP, state.t, steps, wall,
                              {"t": state.t, "max_u": max_u}), series, state
        if dt <= controls.dt_min * (1 + 1e-12) and max_u > prev_max:
            pinned += 1
            if pinned >= 100:
                series.append(monitors.sample(state, monitor_p, flux))
                wall = time.perf_counter() - start
                return RunOutcome(BLOW_UP, state.t, steps, wall,
                                  {"t": state.t, "max_u": max_u,
                                   "reason": "dt pinned at dt_min with growing max u"}), series, state
        else:
            pinned = 0
        prev_max = max_u
        if steps % controls.cadence == 0 or state.t >= T:
            series.append(monitors.sample(state, monitor_p, flux))
    if series.times and series.times[-1] < state.t:
        series.append(monitors.sample(state, monitor_p, flux))
    wall = time.perf_counter() - start
    return RunOutcome(COMPLETED, state.t, steps, wall), series, state


def run_with_state(params: ModelParams, grid: Grid, initial, T: float,
                   controls: StepControls = StepControls(),
                   flux: FluxSpec | None = None):
    """Like run(), but also returns the final SimState (for diagnostics)."""
    if flux is None:
        flux = FluxSpec.power_law(params.p)
    u0, v0 = initial
    start = time.perf_counter()
    if params.tau == 0:
        v0, _ = helmholtz_solve(Field(grid, params.alpha * u0.values), params.beta,
                                tol=controls.solver_tol, backend=controls.solver_backend)
    state = SimState(u=u0.copy(), v=v0.copy(), t=0.0, dt=controls.dt_max)
    step_fn = step_parabolic_elliptic if params.tau == 0 else step_parabolic_parabolic
    return _drive(state, params, T, controls, flux, step_fn,
                  monitor_p=params.p, start=start)
