"""The nine acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import time

import numpy as np
import pytest

from kinfluid.entropy import EntropyReport, entropy_inequality_monitor
from kinfluid.fluid_solver import FluidStepConfig, fluid_step
from kinfluid.harness.checks import (
    double_bump,
    flux_bound_check,
    oracle_checks,
    pressure_bound_checks,
    relative_entropy_oracle_check,
    viscosity_young_check,
)
from kinfluid.harness.config import load_config
from kinfluid.harness.initial_data import well_prepared_data
from kinfluid.harness.runner import NORM_NAMES, run_single, run_sweep
from kinfluid.kinetic_solver import (
    KineticStepConfig,
    fokker_planck_step,
    kinetic_step_with_exchange,
    max_kinetic_dt,
)
from kinfluid.limit_solver import drag_relaxation, mms_study
from kinfluid.phase_space import (
    KineticField,
    ModelParams,
    ViscosityModel,
    build_grid,
    integrate_x,
    maxwellian,
    moments,
)

SWEEP_EPSILONS = (0.1, 0.05, 0.025, 0.0125)


@pytest.fixture(scope="module")
def default_cfg():
    return load_config("configs/default.cfg")


@pytest.fixture(scope="module")
def sweep(default_cfg):
    start = time.perf_counter()
    result = run_sweep(default_cfg.with_epsilon(0.05, None), SWEEP_EPSILONS)
    return result, time.perf_counter() - start


def test_criterion_1_conservation(acceptance_line, default_cfg):
    grid = build_grid(128, 128, 1.0, 8.0)
    params = default_cfg.params
    f, fluid, _ = well_prepared_data("maxwellian_exact", grid, params)
    dt = 0.9 * max_kinetic_dt(grid, fluid.v)
    kcfg, fcfg = KineticStepConfig(dt), FluidStepConfig(dt)

    def totals(f, fluid):
        mom = moments(f)
        return f.mass, integrate_x(grid, fluid.n), integrate_x(grid, mom.momentum + fluid.w)

    mf0, mn0, p0 = totals(f, fluid)
    scale = integrate_x(grid, np.abs(moments(f).momentum) + np.abs(fluid.w))
    start = time.perf_counter()
    for _ in range(1000):
        f, ex = kinetic_step_with_exchange(f, fluid, kcfg, params)
        fluid = fluid_step(fluid, f, fcfg, params, exchange=ex)
    elapsed = time.perf_counter() - start
    mf1, mn1, p1 = totals(f, fluid)
    dmf, dmn, dp = abs(mf1 - mf0) / mf0, abs(mn1 - mn0) / mn0, abs(p1 - p0) / scale
    ok = dmf < 1e-9 and dmn < 1e-9 and dp < 1e-7 and elapsed < 60
    acceptance_line(1, "conservation", ok,
                    f"mass_f {dmf:.1e}, mass_n {dmn:.1e}, momentum {dp:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_ap_fixed_point(acceptance_line):
    grid = build_grid(16, 128, 1.0, 8.0)
    x = grid.x
    eq = maxwellian(grid, 1 + 0.3 * np.sin(2 * np.pi * x), 0.5 * np.cos(2 * np.pi * x))
    out = fokker_planck_step(eq, 0.1, 0.05)
    fixed = float(np.max(np.abs(out.values - eq.values).sum(axis=1) / eq.values.sum(axis=1)))

    rng = np.random.default_rng(0)
    fields = [double_bump(grid)] + [
        KineticField(grid, rng.uniform(0, 1, (16, 128)) ** 3) for _ in range(3)]
    stiff = 0.0
    for f in fields:
        g = fokker_planck_step(f, 1.0, 1e-6)
        mom = moments(f)
        gap = np.abs(g.values - maxwellian(grid, mom.rho, mom.u).values).sum(axis=1) * grid.dv
        stiff = max(stiff, float(gap.max()))
    ok = fixed <= 1e-12 and stiff <= 1e-8
    acceptance_line(2, "AP fixed point", ok,
                    f"fixed point per-cell rel L1 {fixed:.1e}, dt/eps=1e6 per-cell L1 {stiff:.1e}")
    assert ok


def test_criterion_3_relaxation_rate(acceptance_line):
    grid = build_grid(1, 256, 1.0, 8.0)
    xi = grid.xi
    m = maxwellian(grid, 1.0, 0.0).values
    eps = 0.01
    worst = 0.0
    for ratio in (0.1, 0.25, 0.5):
        f = KineticField(grid, m * (1 + 0.05 * xi + 0.02 * (xi**2 - 1)))
        dev = np.sqrt(np.sum((f.values - m) ** 2 / m))
        for _ in range(5):
            f = fokker_planck_step(f, ratio * eps, eps, u=0.0)
            new = np.sqrt(np.sum((f.values - m) ** 2 / m))
            worst = max(worst, abs(new / dev / np.exp(-ratio) - 1))
            dev = new
    ok = worst <= 0.2
    acceptance_line(3, "relaxation rate", ok, f"max relative deviation from exp(-dt/eps) {worst:.3f}")
    assert ok


def test_criterion_4_inequality_suite(acceptance_line):
    start = time.perf_counter()
    results = [*pressure_bound_checks(10_000), viscosity_young_check(10_000),
               flux_bound_check(10_000)]
    elapsed = time.perf_counter() - start
    stated = [r for r in results if r.name != "pressure.piecewise_near_corrected"]
    failed = [r for r in stated if not r.passed]
    ok = not failed and elapsed < 5
    detail = f"{len(stated) - len(failed)}/{len(stated)} checks clean, {elapsed:.2f} s"
    if failed:
        detail += "; " + "; ".join(f"{r.name}: {r.detail}" for r in failed)
    acceptance_line(4, "inequality suite", ok, detail)
    assert ok


def test_criterion_5_oracles(acceptance_line):
    results = [*oracle_checks(100, tol=1e-9), relative_entropy_oracle_check(100, tol=1e-10)]
    ok = all(r.passed for r in results)
    acceptance_line(5, "oracle agreement", ok, "; ".join(f"{r.name}: {r.detail}" for r in results))
    assert ok


def test_criterion_6_entropy_monitor(acceptance_line, default_cfg):
    art = run_single(default_cfg.with_epsilon(0.05, None))
    mon = art.monitor
    rep = art.report()
    # negative control: inflate F at one step so the inequality must break there
    target = len(art.history) // 2
    corrupted = list(art.history)
    e = corrupted[target]
    bump = 10 * (abs(mon.margin).max() + 1.0)
    corrupted[target] = EntropyReport(e.f_total + bump, e.kinetic_part, e.fluid_kinetic,
                                      e.fluid_internal, e.d1, e.d2, e.drag_slip, e.viscous,
                                      e.thermal, e.mass)
    control = entropy_inequality_monitor(corrupted, art.config.params, art.dt, mon.c_mon)
    ok = (mon.holds and rep["c_mon"] == mon.c_mon
          and control.first_violation == target)
    acceptance_line(6, "entropy monitor", ok,
                    f"holds={mon.holds} over {len(art.history)} steps, c_mon={mon.c_mon}, "
                    f"min margin {mon.margin.min():.2e}; control violation at step "
                    f"{control.first_violation} (corrupted {target})")
    assert ok


def test_criterion_7_epsilon_sweep_rate(acceptance_line, sweep):
    result, elapsed = sweep
    ok = result.re_strictly_decreasing and result.fitted_slope >= 0.4 and elapsed < 300
    re = ", ".join(f"{r:.3e}" for r in result.re_final)
    acceptance_line(7, "epsilon-sweep rate", ok,
                    f"re_final [{re}], slope {result.fitted_slope:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_8_limit_solver(acceptance_line):
    params = ModelParams(1.5, ViscosityModel.affine())
    study = mms_study(params, (64, 128, 256))
    rng = np.random.default_rng(5)
    rho, n = rng.uniform(0.1, 10, 10_000), rng.uniform(0.1, 10, 10_000)
    m, w = rho * rng.uniform(-2, 2, 10_000), n * rng.uniform(-2, 2, 10_000)
    worst = 0.0
    for dt in (1e-4, 0.01, 0.37, 10.0):
        m2, w2 = drag_relaxation(rho, m, n, w, dt)
        worst = max(worst, float(np.max(np.abs((m2 + w2) - (m + w)) / (np.abs(m) + np.abs(w)))))
    ok = study.min_order >= 0.9 and worst <= 1e-14
    orders = ", ".join(f"{o:.3f}" for o in study.orders)
    acceptance_line(8, "limit solver", ok,
                    f"MMS orders [{orders}], per-cell (m+w) rel change {worst:.1e}")
    assert ok


def test_criterion_9_strong_convergence(acceptance_line, sweep):
    result, _ = sweep
    monotone = result.norms_decreasing()
    rng = np.random.default_rng(9)
    n_e, n = rng.uniform(0.1, 10, (2, 100_000))
    v_e, v = rng.uniform(-3, 3, (2, 100_000))
    lhs = n_e * v_e**2 - n * v**2
    rhs = n_e * (v_e - v) ** 2 + 2 * v * (n_e * v_e - n * v) + v**2 * (n - n_e)
    identity = float(np.max(np.abs(lhs - rhs) / (1 + np.abs(n_e * v_e**2) + np.abs(n * v**2))))
    bad = [k for k in NORM_NAMES if not monotone[k]]
    ok = not bad and identity <= 1e-12
    detail = f"{len(NORM_NAMES) - len(bad)}/{len(NORM_NAMES)} norms monotone, identity {identity:.1e}"
    for k in bad:
        detail += f"; {k} " + ", ".join(f"{nm[k]:.4e}" for nm in result.norms)
    acceptance_line(9, "strong-convergence norms", ok, detail)
    assert ok
