"""Single runs, epsilon sweeps, rate fitting and strong-convergence norms."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..entropy import (
    MonitorReport,
    entropy_inequality_monitor,
    kinetic_entropy,
    kinetic_log_mass,
    relative_entropy,
)
from ..errors import CFLError, SolverError, VacuumError
from ..fluid_solver import FluidStepConfig, fluid_step, max_fluid_dt
from ..kinetic_solver import (
    KineticStepConfig,
    kinetic_step_with_exchange,
    max_kinetic_dt,
)
from ..limit_solver import limit_step, max_limit_dt
from ..phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    integrate_x,
    maxwellian,
    moments,
    restrict,
)
from .config import RunConfig
from .initial_data import limit_data, well_prepared_data

log = logging.getLogger(__name__)

ENTROPY_HEADER = ("t", "F", "D1", "D2", "RE_total", "RE_uk", "RE_vk", "RE_prho", "RE_pn",
                  "mass_f", "mass_n", "mom_total")
SWEEP_HEADER = ("epsilon", "re_final", "diss_visc", "diss_drag")

NORM_NAMES = ("f_maxwellian", "rho", "n_l1", "n_lgamma", "rho_u", "n_v", "rho_u2", "n_v2")

# shared-dt safety factors below each explicit stability limit
KINETIC_CFL = 0.9
FLUID_CFL = 0.8
_DT_SAFETY = 0.95


class RunError(RuntimeError):
    """A solver failed during a run; ``step`` is the index of the failing step."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class RunArtifact:
    """Recorded output of :func:`run_single`.

    ``entropy`` and ``rel_entropy`` hold one entry per snapshot; ``history``
    holds the entropy report of every step (used by the monitor). ``norms``
    are the time integrals of the strong-convergence distances.
    """

    config: RunConfig
    dt: float
    nsteps: int
    times: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    rel_entropy: list = field(default_factory=list)
    mass_f: list = field(default_factory=list)
    mass_n: list = field(default_factory=list)
    mom_total: list = field(default_factory=list)
    log_mass: list = field(default_factory=list)
    history: list = field(default_factory=list)
    monitor: MonitorReport | None = None
    norms: dict = field(default_factory=dict)
    diss_visc: float = 0.0
    diss_drag: float = 0.0
    momentum_scale: float = 1.0
    final_f: KineticField | None = None
    final_fluid: FluidState | None = None
    final_reference: MixtureState | None = None

    @property
    def re_final(self) -> float:
        return self.rel_entropy[-1].total

    def csv_rows(self):
        for t, e, r, mf, mn, mt in zip(self.times, self.entropy, self.rel_entropy,
                                       self.mass_f, self.mass_n, self.mom_total):
            yield (t, e.f_total, e.d1, e.d2, r.total, r.kinetic_velocity_gap,
                   r.fluid_velocity_gap, r.kinetic_pressure_gap, r.fluid_pressure_gap,
                   mf, mn, mt)

    def report(self) -> dict:
        mon = self.monitor
        cfg = self.config
        return {
            "epsilon": cfg.params.epsilon,
            "gamma": cfg.params.gamma,
            "nx": cfg.nx, "nv": cfg.nv, "vmax": cfg.vmax, "length": cfg.length,
            "recipe": cfg.recipe,
            "ref_factor": cfg.ref_factor,
            "t_final": self.dt * self.nsteps,
            "dt": self.dt,
            "nsteps": self.nsteps,
            "snapshots": len(self.times),
            "c_mon": mon.c_mon if mon else cfg.c_mon,
            "monitor_holds": bool(mon.holds) if mon else None,
            "monitor_first_violation": mon.first_violation if mon else None,
            "monitor_min_margin": float(mon.margin.min()) if mon else None,
            "modified_monitor_holds": bool(mon.modified_holds) if mon else None,
            "modified_monitor_first_violation": mon.modified_first_violation if mon else None,
            "re_initial": self.rel_entropy[0].total,
            "re_final": self.re_final,
            "diss_visc": self.diss_visc,
            "diss_drag": self.diss_drag,
            "norms": dict(self.norms),
            "mass_f_drift": _rel_drift(self.mass_f),
            "mass_n_drift": _rel_drift(self.mass_n),
            "mom_total_drift": abs(self.mom_total[-1] - self.mom_total[0]) / self.momentum_scale,
            "log_mass_initial": self.log_mass[0],
            "log_mass_max": max(self.log_mass),
        }


def _rel_drift(series) -> float:
    series = np.asarray(series)
    return float(np.max(np.abs(series - series[0])) / abs(series[0]))


def shared_dt(cfg: RunConfig, fluid: FluidState, U_fine: MixtureState) -> float:
    """Minimum of the kinetic, fluid and reference stability limits, with a margin."""
    params = cfg.params
    return _DT_SAFETY * min(
        max_kinetic_dt(cfg.grid, fluid.v, KINETIC_CFL),
        max_fluid_dt(fluid, params, FLUID_CFL),
        max_limit_dt(U_fine, params, FLUID_CFL),
    )


def candidate_state(f: KineticField, fluid: FluidState) -> MixtureState:
    """``V = (rho, rho u, n, n v)`` assembled from the moments of ``f`` and the fluid."""
    mom = moments(f)
    return MixtureState(f.grid, mom.rho, mom.momentum, fluid.n, fluid.w)


def distance_norms(f: KineticField, fluid: FluidState, U: MixtureState,
                   gamma: float) -> dict:
    """Instantaneous strong-convergence distances between a kinetic-fluid state and ``U``."""
    grid = f.grid
    mom = moments(f)
    rho_e, u_e = mom.rho, mom.u
    n_e, v_e = fluid.n, fluid.v
    gap_f = np.abs(f.values - maxwellian(grid, U.rho, U.u).values)
    dn = np.abs(n_e - U.n)
    return {
        "f_maxwellian": float(gap_f.sum() * grid.dx * grid.dv),
        "rho": integrate_x(grid, np.abs(rho_e - U.rho)),
        "n_l1": integrate_x(grid, dn),
        "n_lgamma": integrate_x(grid, dn**gamma) ** (1.0 / gamma),
        "rho_u": integrate_x(grid, np.abs(mom.momentum - U.m)),
        "n_v": integrate_x(grid, np.abs(fluid.w - U.w)),
        "rho_u2": integrate_x(grid, np.abs(rho_e * u_e**2 - U.rho * U.u**2)),
        "n_v2": integrate_x(grid, np.abs(n_e * v_e**2 - U.n * U.v**2)),
    }


def strong_convergence_norms(artifact: RunArtifact) -> dict:
    """Time-integrated distances ``int_0^T ||.|| dt`` recorded by :func:`run_single`."""
    return dict(artifact.norms)


def _gradient(values, dx):
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def _dissipation_gaps(fluid: FluidState, V: MixtureState, U: MixtureState, params):
    """Integrands of the viscous and drag dissipation gaps between the runs."""
    dx = U.grid.dx
    visc = params.viscosity(fluid.n) * _gradient(U.v - fluid.v, dx) ** 2
    drag = V.rho * ((V.u - V.v) - (U.u - U.v)) ** 2
    return integrate_x(U.grid, visc), integrate_x(U.grid, drag)


def run_single(cfg: RunConfig) -> RunArtifact:
    """Co-evolve the kinetic-fluid pair and the limit reference; record diagnostics.

    The reference runs on a grid ``cfg.ref_factor`` times finer and is cell
    averaged onto the run grid before every comparison. All three systems
    share one time step. If ``cfg.outdir`` is set, ``entropy.csv`` and
    ``report.json`` are written there.
    """
    params = cfg.params
    grid = cfg.grid
    fine = grid.refine(cfg.ref_factor)
    f, fluid, _ = well_prepared_data(cfg.recipe, grid, params, cfg.amplitude)
    U_fine = limit_data(fine, params, cfg.recipe)

    if cfg.dt is None:
        dt_max = shared_dt(cfg, fluid, U_fine)
        nsteps = max(1, math.ceil(cfg.t_final / dt_max))
        dt = cfg.t_final / nsteps
    else:
        dt = float(cfg.dt)
        nsteps = max(1, math.ceil(cfg.t_final / dt - 1e-9))
    if cfg.max_steps is not None:
        nsteps = min(nsteps, cfg.max_steps)
    kcfg = KineticStepConfig(dt, cfl_transport=1.0)
    fcfg = FluidStepConfig(dt, cfl=1.0)

    art = RunArtifact(cfg, dt, nsteps)
    outdir = Path(cfg.outdir) if cfg.outdir else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)

    norms = dict.fromkeys(NORM_NAMES, 0.0)
    prev_norms = None
    prev_gaps = None
    t = 0.0
    step = 0

    def observe(step, t, f, fluid, U_fine):
        nonlocal prev_norms, prev_gaps
        U = restrict(U_fine, grid) if cfg.ref_factor > 1 else U_fine
        V = candidate_state(f, fluid)
        ent = kinetic_entropy(f, fluid, params)
        art.history.append(ent)
        cur = distance_norms(f, fluid, U, params.gamma)
        gaps = _dissipation_gaps(fluid, V, U, params)
        if prev_norms is not None:
            for k in NORM_NAMES:
                norms[k] += 0.5 * dt * (prev_norms[k] + cur[k])
            art.diss_visc += 0.5 * dt * (prev_gaps[0] + gaps[0])
            art.diss_drag += 0.5 * dt * (prev_gaps[1] + gaps[1])
        prev_norms, prev_gaps = cur, gaps
        if step % cfg.snapshot_stride == 0:
            re = relative_entropy(V, U, params)
            art.times.append(t)
            art.entropy.append(ent)
            art.rel_entropy.append(re)
            art.mass_f.append(f.mass)
            art.mass_n.append(integrate_x(grid, fluid.n))
            art.mom_total.append(integrate_x(grid, V.m + V.w))
            art.log_mass.append(kinetic_log_mass(f))
            if cfg.dump_f and outdir is not None:
                np.save(outdir / f"f_{step:06d}.npy", f.values)

    mom0 = moments(f)
    art.momentum_scale = integrate_x(grid, np.abs(mom0.momentum) + np.abs(fluid.w)) or 1.0
    observe(0, 0.0, f, fluid, U_fine)
    try:
        for step in range(1, nsteps + 1):
            f, exchange = kinetic_step_with_exchange(f, fluid, kcfg, params)
            fluid = fluid_step(fluid, f, fcfg, params, exchange=exchange)
            U_fine = limit_step(U_fine, fcfg, params)
            t = step * dt
            observe(step, t, f, fluid, U_fine)
            if step % max(1, nsteps // 10) == 0:
                log.info("eps=%g step %d/%d t=%.4f RE=%.3e", params.epsilon, step, nsteps,
                         t, art.rel_entropy[-1].total if art.rel_entropy else float("nan"))
    except (SolverError, CFLError, VacuumError, ValueError) as exc:
        raise RunError(step, exc) from exc

    art.norms = norms
    art.monitor = entropy_inequality_monitor(art.history, params, dt, c_mon=cfg.c_mon)
    art.final_f, art.final_fluid = f, fluid
    art.final_reference = restrict(U_fine, grid) if cfg.ref_factor > 1 else U_fine
    if outdir is not None:
        write_entropy_csv(art, outdir / "entropy.csv")
        (outdir / "report.json").write_text(json.dumps(art.report(), indent=2) + "\n")
    return art


def write_entropy_csv(art: RunArtifact, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENTROPY_HEADER)
        for row in art.csv_rows():
            w.writerow([_fmt(v) for v in row])


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    constant: float

    @property
    def defined(self) -> bool:
        return math.isfinite(self.slope)


def fit_rate(epsilons, values) -> RateFit:
    """Least-squares fit of ``log(value) = log(C) + slope * log(eps)``.

    Fewer than two distinct epsilons give an undefined fit (NaN slope and
    constant) instead of a fabricated one.
    """
    eps = np.asarray(epsilons, dtype=float)
    vals = np.asarray(values, dtype=float)
    if eps.shape != vals.shape:
        raise ValueError("epsilons and values differ in length")
    if np.any(eps <= 0) or np.any(vals <= 0):
        raise ValueError("rate fit needs positive epsilons and values")
    if np.unique(eps).size < 2:
        return RateFit(math.nan, math.nan)
    slope, intercept = np.polyfit(np.log(eps), np.log(vals), 1)
    return RateFit(float(slope), float(np.exp(intercept)))


@dataclass
class SweepResult:
    epsilons: list
    re_final: list
    re_curves: list
    fitted_slope: float
    fitted_constant: float
    diss_visc: list
    diss_drag: list
    norms: list
    reports: list = field(default_factory=list)

    @property
    def re_strictly_decreasing(self) -> bool:
        r = self.re_final
        return all(r[i + 1] < r[i] for i in range(len(r) - 1))

    def norms_decreasing(self) -> dict:
        """Per norm, whether it decreases strictly along the (descending) epsilons."""
        out = {}
        for k in NORM_NAMES:
            vals = [n[k] for n in self.norms]
            out[k] = all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))
        return out

    def rows(self):
        for row in zip(self.epsilons, self.re_final, self.diss_visc, self.diss_drag):
            yield row


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in result.rows():
            w.writerow([_fmt(v) for v in row])


def run_sweep(base_cfg: RunConfig, epsilons, outdir=None) -> SweepResult:
    """Run :func:`run_single` for each epsilon on identical data and fit the rate.

    A failed run aborts the sweep with a :class:`RunError` naming the
    epsilon, since one missing point would bias the fit.
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(eps[i + 1] >= eps[i] for i in range(len(eps) - 1)):
        raise ValueError("epsilons must be strictly decreasing")
    root = Path(outdir) if outdir else None
    arts = []
    for e in eps:
        sub = str(root / f"eps_{e:g}") if root else None
        try:
            arts.append(run_single(base_cfg.with_epsilon(e, sub)))
        except RunError as exc:
            raise RunError(exc.step, RuntimeError(f"epsilon={e:g}: {exc}")) from exc
    re_final = [a.re_final for a in arts]
    fit = fit_rate(eps, re_final) if all(r > 0 for r in re_final) else RateFit(math.nan,
                                                                               math.nan)
    result = SweepResult(
        epsilons=eps,
        re_final=re_final,
        re_curves=[[r.total for r in a.rel_entropy] for a in arts],
        fitted_slope=fit.slope,
        fitted_constant=fit.constant,
        diss_visc=[a.diss_visc for a in arts],
        diss_drag=[a.diss_drag for a in arts],
        norms=[strong_convergence_norms(a) for a in arts],
        reports=[a.report() for a in arts],
    )
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(result, root / "sweep.csv")
    return result


def sweep_summary(result: SweepResult) -> dict:
    return {
        "epsilons": result.epsilons,
        "re_final": result.re_final,
        "fitted_slope": result.fitted_slope,
        "fitted_constant": result.fitted_constant,
        "re_strictly_decreasing": result.re_strictly_decreasing,
        "norms_decreasing": result.norms_decreasing(),
    }
