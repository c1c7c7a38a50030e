"""Property suites run by ``verify``: inequalities, oracles, fixed points, conservation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..entropy import (
    check_pressure_bounds,
    flux_bound_constant,
    internal_energy_k,
    relative_entropy,
    relative_entropy_definitional,
    relative_entropy_density,
    relative_flux,
    relative_pressure,
    relative_pressure_tilde,
)
from ..fluid_solver import FluidStepConfig, fluid_step
from ..kinetic_solver import (
    KineticStepConfig,
    fokker_planck_step,
    kinetic_step_with_exchange,
)
from ..limit_solver import drag_relaxation
from ..phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    ModelParams,
    PhaseGrid,
    ViscosityModel,
    build_grid,
    maxwellian,
    moments,
)

SAMPLES = 10_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _params(gamma, n_infty=1.0):
    return ModelParams(gamma, ViscosityModel.constant(1.0), n_infty)


# -- inequalities -----------------------------------------------------------


def pressure_bound_checks(samples: int = SAMPLES, seed: int = 0) -> list:
    rep = check_pressure_bounds(samples, seed=seed)
    out = []
    for c in rep.checks.values():
        detail = f"{c.violations} violations / {c.samples}"
        if c.witnesses:
            detail += f"; first witness {c.witnesses[0]}"
        out.append(CheckResult(f"pressure.{c.name}", c.passed, detail))
    return out


def viscosity_young_check(samples: int = SAMPLES, seed: int = 1) -> CheckResult:
    """Young's inequality behind ``n^2 <= c0 (1 + n) n^gamma`` for ``nu(n) = 1 + n``."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, 100.0, samples)
    bad = 0
    for g in (1.0, 1.5, 2.0):
        c0 = max(g - 1.0, 2.0 - g)
        young = r ** (2 - g) <= (g - 1) + (2 - g) * r + 1e-12 * (1 + r)
        domination = r**2 <= c0 * (1 + r) * r**g * (1 + 1e-12) + 1e-300
        bad += int(np.count_nonzero(~young) + np.count_nonzero(~domination))
    return CheckResult("viscosity.young", bad == 0, f"{bad} violations / {6 * samples}")


def random_states(rng, grid: PhaseGrid, low=0.1, high=10.0, vel=2.0) -> MixtureState:
    nx = grid.nx
    return MixtureState.from_primitive(
        grid, rng.uniform(low, high, nx), rng.uniform(-vel, vel, nx),
        rng.uniform(low, high, nx), rng.uniform(-vel, vel, nx))


def flux_bound_check(samples: int = SAMPLES, seed: int = 2, d: int = 1) -> CheckResult:
    """Pointwise ``|A(V|U)| <= max(2, d(gamma-1)) H(V|U)`` on random state pairs."""
    rng = np.random.default_rng(seed)
    grid = PhaseGrid(samples, 2, 1.0, 1.0)
    bad = 0
    for g in (1.0, 1.5, 2.0):
        params = _params(g)
        V, U = random_states(rng, grid), random_states(rng, grid)
        a = relative_flux(V, U, params)
        h = relative_entropy_density(V, U, params)
        bad += int(np.count_nonzero(a > flux_bound_constant(g, d) * h * (1 + 1e-12) + 1e-300))
    return CheckResult("entropy.flux_bound", bad == 0, f"{bad} violations / {3 * samples}")


def inequality_suite(samples: int = SAMPLES) -> list:
    return [*pressure_bound_checks(samples), viscosity_young_check(samples),
            flux_bound_check(samples)]


# -- quadrature oracles -----------------------------------------------------


def _quad(fn, a, b):
    val, _ = quad(fn, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def oracle_checks(count: int = 100, seed: int = 3, tol: float = 1e-9) -> list:
    """Closed forms of ``K``, ``P`` and ``P~`` against adaptive quadrature."""
    rng = np.random.default_rng(seed)
    worst = {"K": 0.0, "P": 0.0, "Ptilde": 0.0}
    fails = {"K": 0, "P": 0, "Ptilde": 0}
    for _ in range(count):
        g = rng.uniform(1.0, 2.0)
        ninf = rng.uniform(0.5, 2.0)
        n = rng.uniform(0.1, 10.0)
        params = _params(g, ninf)
        ref = n * _quad(lambda z: z ** (g - 2.0), ninf, n)
        got = float(internal_energy_k(n, params))
        worst["K"] = max(worst["K"], abs(got - ref))
        fails["K"] += not _close(got, ref, tol)

        x, y = rng.uniform(0.1, 10.0, 2)
        ref = _quad(lambda z: (x - z) / z, y, x)
        got = float(relative_pressure(x, y))
        worst["P"] = max(worst["P"], abs(got - ref))
        fails["P"] += not _close(got, ref, tol)

        ref = _quad(lambda z: (x - z) * g * z ** (g - 2.0), y, x)
        got = float(relative_pressure_tilde(x, y, params))
        worst["Ptilde"] = max(worst["Ptilde"], abs(got - ref))
        fails["Ptilde"] += not _close(got, ref, tol)
    return [CheckResult(f"oracle.{k}", fails[k] == 0,
                        f"{fails[k]} mismatches / {count}, max abs error {worst[k]:.2e}")
            for k in worst]


def relative_entropy_oracle_check(count: int = 100, seed: int = 4,
                                  tol: float = 1e-10) -> CheckResult:
    """Expansion versus ``E(V) - E(U) - DE(U)(V - U)`` on random state pairs."""
    rng = np.random.default_rng(seed)
    grid = PhaseGrid(16, 2, 1.0, 1.0)
    worst, fails = 0.0, 0
    for i in range(count):
        params = _params((1.0, 1.5, 2.0)[i % 3], rng.uniform(0.5, 2.0))
        V, U = random_states(rng, grid, 0.2, 5.0), random_states(rng, grid, 0.2, 5.0)
        a = relative_entropy(V, U, params).total
        b = relative_entropy_definitional(V, U, params)
        err = abs(a - b) / max(1.0, abs(a))
        worst = max(worst, err)
        fails += err > tol
    return CheckResult("oracle.relative_entropy", fails == 0,
                       f"{fails} mismatches / {count}, max rel error {worst:.2e}")


# -- fixed points and conservation -----------------------------------------


def fp_fixed_point_check(tol: float = 1e-12) -> CheckResult:
    grid = build_grid(16, 128, 1.0, 8.0)
    x = grid.x
    f = maxwellian(grid, 1.0 + 0.3 * np.sin(2 * np.pi * x), 0.5 * np.cos(2 * np.pi * x))
    g = fokker_planck_step(f, 0.1, 0.05)
    err = float(np.max(np.abs(g.values - f.values).sum(axis=1) / f.values.sum(axis=1)))
    return CheckResult("kinetic.fp_fixed_point", err <= tol, f"max per-cell rel L1 {err:.2e}")


def double_bump(grid: PhaseGrid) -> KineticField:
    x, xi = grid.x[:, None], grid.xi[None, :]
    vals = (np.exp(-2.0 * (xi - 2.0 - 0.5 * np.sin(2 * np.pi * x)) ** 2)
            + 0.6 * np.exp(-(xi + 1.5) ** 2))
    return KineticField(grid, vals)


def fp_stiff_limit_check(tol: float = 1e-8) -> CheckResult:
    grid = build_grid(16, 128, 1.0, 8.0)
    f = double_bump(grid)
    g = fokker_planck_step(f, 1.0, 1e-6)
    mom = moments(f)
    mx = maxwellian(grid, mom.rho, mom.u)
    err = float((np.abs(g.values - mx.values).sum(axis=1) * grid.dv).max())
    return CheckResult("kinetic.fp_stiff_limit", err <= tol,
                       f"max per-cell L1 to maxwellian(rho, u) {err:.2e}")


def coupled_conservation_check(steps: int = 100) -> CheckResult:
    grid = build_grid(32, 64, 1.0, 8.0)
    params = ModelParams(1.5, ViscosityModel.affine(), epsilon=0.05)
    x = grid.x
    f = maxwellian(grid, 1 + 0.2 * np.sin(2 * np.pi * x), 0.1 * np.sin(2 * np.pi * x))
    fluid = FluidState.from_velocity(grid, 1 + 0.2 * np.cos(2 * np.pi * x),
                                     -0.1 * np.sin(2 * np.pi * x))
    dt = 0.9 * grid.dx / grid.vmax
    kcfg, fcfg = KineticStepConfig(dt), FluidStepConfig(dt)

    def totals(f, fl):
        mom = moments(f)
        return f.mass, fl.n.sum() * grid.dx, (mom.momentum.sum() + fl.w.sum()) * grid.dx

    m0, n0, p0 = totals(f, fluid)
    scale = (np.abs(moments(f).momentum).sum() + np.abs(fluid.w).sum()) * grid.dx
    for _ in range(steps):
        f, ex = kinetic_step_with_exchange(f, fluid, kcfg, params)
        fluid = fluid_step(fluid, f, fcfg, params, exchange=ex)
    m1, n1, p1 = totals(f, fluid)
    dm, dn, dp = abs(m1 - m0) / m0, abs(n1 - n0) / n0, abs(p1 - p0) / scale
    ok = dm < 1e-12 and dn < 1e-12 and dp < 1e-10
    return CheckResult("coupled.conservation", ok,
                       f"{steps} steps: mass_f {dm:.1e}, mass_n {dn:.1e}, momentum {dp:.1e}")


def maxwellian_moment_check(tol: float = 1e-10) -> CheckResult:
    grid = build_grid(4, 256, 1.0, 8.0)
    mom = moments(maxwellian(grid, 1.0, 0.5))
    err = max(float(np.abs(mom.rho - 1).max()), float(np.abs(mom.momentum - 0.5).max()))
    return CheckResult("phase.maxwellian_moments", err <= tol, f"max error {err:.2e}")


def drag_invariant_check(seed: int = 5, tol: float = 1e-14) -> CheckResult:
    rng = np.random.default_rng(seed)
    rho, n = rng.uniform(0.1, 10, 1000), rng.uniform(0.1, 10, 1000)
    m, w = rho * rng.uniform(-2, 2, 1000), n * rng.uniform(-2, 2, 1000)
    m2, w2 = drag_relaxation(rho, m, n, w, 0.37)
    err = float(np.max(np.abs((m2 + w2) - (m + w)) / (np.abs(m) + np.abs(w))))
    return CheckResult("limit.drag_invariant", err <= tol, f"max rel change {err:.2e}")


def verify_suite(samples: int = SAMPLES) -> list:
    return [
        *inequality_suite(samples),
        *oracle_checks(),
        relative_entropy_oracle_check(),
        maxwellian_moment_check(),
        fp_fixed_point_check(),
        fp_stiff_limit_check(),
        coupled_conservation_check(),
        drag_invariant_check(),
    ]
