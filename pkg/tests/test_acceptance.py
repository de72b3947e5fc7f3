"""Acceptance gate: one test per headline criterion, each printing a
single PASS/FAIL line (run with -s to see them).

These exercise the full stack at desk scale: exact steady states, closed
form oracles, convergence order, conservation accounting, long bounded
runs in the guaranteed regimes, the scalar-problem dichotomy, threshold
arithmetic, inequality-constant stability, and the norm ladder.
"""
import math
import time

import numpy as np
import pytest

from ksnbc import cli, inequality_lab as lab, model, monitors, stepper
from ksnbc.grid import (
    Field,
    Grid,
    boundary_integral_pow,
    integrate,
    lp_norm,
)
from ksnbc.model import ModelParams
from ksnbc.operators import FluxSpec, chemo_divergence, laplacian_homogeneous
from ksnbc.stepper import SimState, StepControls, adapt_dt


def _report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def gaussian_bump(grid, amplitude=5.0, width=0.1):
    center = [L / 2 for L in grid.extents]
    mesh = grid.meshgrid()
    r2 = sum((x - c) ** 2 for x, c in zip(mesh, center))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width**2)))


def thm13_params():
    return model.validate(dict(chi=1.0, a=1.0, mu=1.0, alpha=1.0, beta=1.0,
                               tau=1, p=1.3, dim=2))


@pytest.fixture(scope="module")
def thm13_run():
    """The evolving-signal guaranteed-bounded reference run (64^2, T=20)."""
    grid = Grid((1.0, 1.0), (64, 64))
    u0 = gaussian_bump(grid)
    start = time.perf_counter()
    outcome, series, state = stepper.run_with_state(
        thm13_params(), grid, (u0, Field.zeros(grid)), T=20.0
    )
    wall = time.perf_counter() - start
    return outcome, series, state, wall


def test_01_steady_state_preservation():
    grid = Grid((1.0, 1.0), (32, 32))
    params = thm13_params()  # a = mu = alpha = beta = 1
    u0 = Field.constant(grid, 1.0)
    v0 = Field.constant(grid, 1.0)
    controls = StepControls(fixed_dt=1e-3)
    start = time.perf_counter()
    outcome, _series, state = stepper.run_with_state(
        params, grid, (u0, v0), T=1.0, controls=controls,
        flux=FluxSpec.homogeneous(),
    )
    wall = time.perf_counter() - start
    dev_u = np.abs(state.u.values - 1.0).max()
    dev_v = np.abs(state.v.values - 1.0).max()
    ok = (outcome.completed and outcome.steps == 1000
          and dev_u <= 1e-10 and dev_v <= 1e-10 and wall < 5.0)
    _report("steady-state preservation",
            ok, f"dev_u={dev_u:.2e}, dev_v={dev_v:.2e}, "
                f"{outcome.steps} steps, {wall:.2f}s")


def test_02_logistic_oracle():
    grid = Grid((1.0, 1.0), (16, 16))
    params = model.validate(dict(chi=0.0, a=1.0, mu=1.0, alpha=1.0, beta=1.0,
                                 tau=1, p=1.3, dim=2))
    u0 = Field.constant(grid, 0.2)
    controls = StepControls(fixed_dt=1e-3)
    start = time.perf_counter()
    outcome, _series, state = stepper.run_with_state(
        params, grid, (u0, Field.zeros(grid)), T=5.0, controls=controls,
        flux=FluxSpec.homogeneous(),
    )
    wall = time.perf_counter() - start
    exact = 0.2 * math.e**5 / (1.0 + 0.2 * (math.e**5 - 1.0))
    rel_err = np.abs(state.u.values - exact).max() / exact
    ok = outcome.completed and rel_err <= 1e-3 and wall < 5.0
    _report("logistic oracle", ok, f"rel_err={rel_err:.2e}, {wall:.2f}s")


def test_03_diffusion_convergence():
    # pure heat equation; a = mu = 0 is outside the validated parameter
    # range, so the coefficients are constructed directly
    params = ModelParams(chi=0.0, a=0.0, mu=0.0, alpha=1.0, beta=1.0,
                         tau=1, p=1.1, dim=1)
    T = 0.1
    errs = []
    for n in (32, 64, 128):
        grid = Grid((1.0,), (n,))
        h = grid.h[0]
        u0 = Field.from_function(grid, lambda x: np.cos(np.pi * x))
        controls = StepControls(fixed_dt=h * h, enforce_nonnegativity=False)
        outcome, _series, state = stepper.run_with_state(
            params, grid, (u0, Field.zeros(grid)), T=T, controls=controls,
            flux=FluxSpec.homogeneous(),
        )
        assert outcome.completed
        x = grid.centers()[0]
        exact = math.exp(-math.pi**2 * T) * np.cos(np.pi * x)
        errs.append(np.abs(state.u.values - exact).max())
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = min(orders) >= 1.8
    _report("diffusion spatial order", ok,
            f"errors={[f'{e:.3e}' for e in errs]}, orders={[f'{o:.2f}' for o in orders]}")


def test_04_mass_balance_per_step():
    grid = Grid((1.0, 1.0), (64, 64))
    params = thm13_params()
    flux = FluxSpec.power_law(params.p)
    controls = StepControls()
    state = SimState(u=gaussian_bump(grid), v=Field.zeros(grid),
                     t=0.0, dt=controls.dt_max)
    T = 2.0
    worst_telescope = 0.0
    worst_balance = 0.0
    max_dt = 0.0
    while state.t < T:
        dt = min(adapt_dt(state, params, controls, flux), T - state.t)
        new = stepper.step_parabolic_parabolic(state, params, dt, flux, controls)
        # spatial telescoping: transport terms integrate to exactly zero
        tele = abs(integrate(chemo_divergence(state.u, new.v)))
        tele = max(tele, abs(integrate(laplacian_homogeneous(new.u))))
        worst_telescope = max(worst_telescope, tele)
        # full balance: mass change against the dt-explicit reaction and
        # boundary terms of the integrated equation
        reaction = params.a * integrate(state.u) - params.mu * lp_norm(state.u, 2) ** 2
        influx = boundary_integral_pow(state.u, params.p)
        balance = abs(integrate(new.u) - integrate(state.u)
                      - dt * (reaction + influx))
        worst_balance = max(worst_balance, balance)
        max_dt = max(max_dt, dt)
        state = new
    ok = worst_telescope <= 1e-12 and worst_balance <= 5.0 * max_dt**2
    _report("mass balance", ok,
            f"telescoping={worst_telescope:.2e} (<=1e-12), "
            f"balance={worst_balance:.2e} (<= {5 * max_dt**2:.2e})")


def test_05_bounded_regime_evolving_signal(thm13_run):
    outcome, series, _state, wall = thm13_run
    verdicts = {name: monitors.verdict(series, name)
                for name in ("sup_u", "llogl", "gradv2", "phi")}
    all_bounded = all(v.status == monitors.BOUNDED for v in verdicts.values())
    slopes_ok = all(v.tail_slope <= 1e-3 for v in verdicts.values())
    ok = outcome.completed and all_bounded and slopes_ok and wall < 120.0
    detail = ", ".join(f"{k}={v.status}(slope {v.tail_slope:.1e})"
                       for k, v in verdicts.items())
    _report("evolving-signal bounded regime", ok, f"{detail}, {wall:.1f}s")


def test_06_bounded_regime_quasi_static():
    grid = Grid((1.0, 1.0), (64, 64))
    params = model.validate(dict(chi=1.0, a=1.0, mu=1.0, alpha=1.0, beta=1.0,
                                 tau=0, p=1.3, dim=2))
    start = time.perf_counter()
    outcome, series = stepper.run(params, grid,
                                  (gaussian_bump(grid), Field.zeros(grid)),
                                  T=20.0)
    wall = time.perf_counter() - start
    v_sup = monitors.verdict(series, "sup_u")
    v_l2 = monitors.verdict(series, "l2")
    ok = (outcome.completed and v_sup.status == monitors.BOUNDED
          and v_l2.status == monitors.BOUNDED and wall < 60.0)
    _report("quasi-static bounded regime", ok,
            f"sup_u={v_sup.status}, l2={v_l2.status}, {wall:.1f}s")


def test_07_nbc_dichotomy(tmp_path, capsys):
    grid = Grid((1.0,), (128,))
    # (a) subcritical boundary exponent: bounded
    nbc_a = model.validate_nbc(dict(mu=1.0, Q=2.0, P=1.2))
    outcome_a, series_a = stepper.run_nbc(nbc_a, grid,
                                          Field.constant(grid, 5.0), T=10.0)
    verdict_a = monitors.verdict(series_a, "sup_u")
    # (b) supercritical: blow-up, observed through the CLI exit code
    cfg = tmp_path / "super.toml"
    cfg.write_text(
        "[nbc]\nmu = 1.0\nQ = 2.0\nP = 1.9\n\n"
        "[grid]\ncells = [128]\n\n"
        "[ic]\nkind = \"constant\"\namplitude = 20.0\n\n"
        f"[run]\nT = 10.0\nout = \"{tmp_path / 'nbcout'}\"\n"
    )
    code = cli.main(["nbc", str(cfg)])
    capsys.readouterr()
    series_b = monitors.MonitorSeries.read_csv(tmp_path / "nbcout" / "series.csv")
    t_blow = series_b.times[-1]
    ok = (outcome_a.completed and verdict_a.status == monitors.BOUNDED
          and code == 2 and t_blow < 10.0)
    _report("scalar-problem dichotomy", ok,
            f"P=1.2 {verdict_a.status}, P=1.9 exit={code} at t={t_blow:.3f}")


def test_08_threshold_arithmetic():
    checks = [
        (model.mu_critical_pe(2, 5.0, 2.0), 0.0),
        (model.mu_critical_pe(3, 1.0, 1.0), 1.0 / 3.0),
        (model.mu_critical_pe(4, 2.0, 1.0), 1.0),
        (model.mu0_3d(1.0, 1.0, 1.0), 26.5),
        (model.mu0_3d(2.0, 1.0, 1.0), 31.5),
        (model.mu0_3d(1.0, 100.0, 0.01), 202.0 / 3.0),
    ]
    worst = max(abs(got - want) for got, want in checks)
    ok = worst <= 1e-12
    _report("threshold arithmetic", ok, f"max |error| = {worst:.2e}")


def test_09_inequality_lab():
    spec = lab.EnsembleSpec(seed=42, count=200)
    fits = {}
    for n in (64, 128):
        grid = Grid((1.0, 1.0), (n, n))
        fields = lab.generate_ensemble(grid, spec)
        fits[n] = {
            "gny": lab.check_gny(fields, eta=0.1).fitted,
            "trace": lab.check_boundary_trace(fields, r=1.0, p=1.3,
                                              eps=0.5).fitted,
            "reg": lab.check_boundary_reg(fields, r=1.0, p=1.3,
                                          eta=0.2).fitted,
        }
    ratios = {}
    stable = True
    for key in ("gny", "trace", "reg"):
        a, b = fits[64][key], fits[128][key]
        if max(a, b) < 1e-9:  # both vanish: inequality holds without slack
            ratios[key] = 1.0
            continue
        ratios[key] = max(a, b) / max(min(a, b), 1e-300)
        stable = stable and ratios[key] <= 2.0
    conv_ok = True
    for n in (64, 128):
        grid = Grid((1.0, 1.0), (n, n))
        cosine = Field.from_function(
            grid, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y)
        )
        conv_ok = conv_ok and lab.check_convexity_sign(cosine) <= 10.0 * max(grid.h)
        conv_ok = conv_ok and lab.check_convexity_sign(
            Field.constant(grid, 3.0)) == 0.0
    ok = stable and conv_ok
    _report("inequality constants", ok,
            f"64/128 ratios {dict((k, f'{v:.2f}') for k, v in ratios.items())}, "
            f"convexity_ok={conv_ok}")


def test_10_moser_ladder(thm13_run):
    _outcome, _series, state, _wall = thm13_run
    rungs = monitors.moser_ladder(state.u, r0=3.0, K=6)
    nondecreasing = bool(np.all(np.diff(rungs) >= 0.0))
    top = rungs[6]
    sup = state.u.max()
    within = abs(top - sup) <= 0.05 * sup
    ok = nondecreasing and within
    _report("norm ladder", ok,
            f"monotone={nondecreasing}, top rung {top:.4f} vs sup {sup:.4f} "
            f"({100 * abs(top - sup) / sup:.2f}%)")
