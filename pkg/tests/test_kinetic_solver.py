import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinfluid.errors import CFLError
from kinfluid.fluid_solver import FluidStepConfig
from kinfluid.harness.checks import double_bump
from kinfluid.kinetic_solver import (
    KineticStepConfig,
    drag_step,
    fokker_planck_step,
    kinetic_step,
    max_kinetic_dt,
    transport_step_x,
)
from kinfluid.limit_solver import limit_step
from kinfluid.phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    ModelParams,
    ViscosityModel,
    build_grid,
    maxwellian,
    moments,
)


def _params(eps=0.05):
    return ModelParams(1.5, ViscosityModel.affine(), epsilon=eps)


def _l1_per_cell(a, b, dv):
    return np.abs(a - b).sum(axis=1) * dv


# -- transport --------------------------------------------------------------


def test_transport_x_independent_unchanged():
    g = build_grid(8, 16, 1.0, 4.0)
    f = maxwellian(g, 1.3, 0.4)
    out = transport_step_x(f, 0.9 * g.dx / g.vmax)
    assert np.array_equal(out.values, f.values)


def test_transport_pulse_moves_downwind():
    g = build_grid(16, 4, 1.0, 2.0)
    vals = np.zeros((16, 4))
    vals[5, 3] = 1.0  # xi = +1.5
    f = KineticField(g, vals)
    out = transport_step_x(f, 0.5 * g.dx / g.vmax)
    assert out.values[6, 3] > 0 and out.values[4, 3] == 0
    assert abs(out.mass - f.mass) <= 1e-13 * f.mass


def _translation_error(nx):
    g = build_grid(nx, 2, 1.0, 1.0)  # xi = -0.5, 0.5
    x = g.x
    prof = np.exp(-50 * (x - 0.5) ** 2)
    f = KineticField(g, np.stack([prof, prof], axis=1))
    dt = 0.5 * g.dx / 0.5
    steps = round(1.0 / (0.5 * dt))  # one full period at |xi| = 0.5
    for _ in range(steps):
        f = transport_step_x(f, dt)
    return np.abs(f.values[:, 1] - prof).sum() * g.dx


def test_transport_period_first_order_error():
    e1, e2, e3 = (_translation_error(n) for n in (64, 128, 256))
    assert e1 > e2 > e3
    assert np.log2(e2 / e3) > 0.7


def test_transport_cfl_rejected():
    g = build_grid(8, 4, 1.0, 2.0)
    with pytest.raises(CFLError):
        transport_step_x(maxwellian(g, 1.0, 0.0), 2 * g.dx / g.vmax)


# -- drag -------------------------------------------------------------------


def test_drag_zero_field():
    g = build_grid(4, 16, 1.0, 4.0)
    out = drag_step(KineticField(g, np.zeros((4, 16))), 0.3, 0.01)
    assert not np.any(out.values)


def test_drag_moves_momentum_toward_fluid_velocity():
    g = build_grid(3, 64, 1.0, 8.0)
    f = maxwellian(g, 1.0, 0.0)  # symmetric bump at 0
    v = np.array([1.0, -0.5, 0.0])
    prev = moments(f).momentum
    for _ in range(20):
        f = drag_step(f, v, 0.01)
        mom = moments(f).momentum
        assert np.all(np.abs(mom - v) <= np.abs(prev - v) + 1e-15)
        prev = mom
    assert np.all(np.sign(prev[:2]) == np.sign(v[:2]))


def test_drag_mass_per_column_conserved():
    g = build_grid(6, 32, 1.0, 6.0)
    f = double_bump(g)
    rho0 = moments(f).rho
    v = np.linspace(-1, 1, 6)
    dt = 0.9 * g.dv / (g.vmax + 1)
    for _ in range(100):
        f = drag_step(f, v, dt)
    assert np.allclose(moments(f).rho, rho0, rtol=1e-12, atol=0)


def test_drag_cfl_rejected():
    g = build_grid(4, 16, 1.0, 4.0)
    with pytest.raises(CFLError):
        drag_step(maxwellian(g, 1.0, 0.0), 0.0, 2 * g.dv / g.vmax)


# -- Fokker-Planck relaxation ------------------------------------------------


def test_fp_fixed_point():
    g = build_grid(8, 128, 1.0, 8.0)
    x = g.x
    f = maxwellian(g, 1 + 0.3 * np.sin(2 * np.pi * x), 0.7 * np.cos(2 * np.pi * x))
    for h in (1e-3, 1.0, 1e6):
        out = fokker_planck_step(f, h, 1.0)
        rel = _l1_per_cell(out.values, f.values, g.dv) / moments(f).rho
        assert rel.max() <= 1e-12


@pytest.mark.parametrize("ratio", [0.1, 1.0, 1e6])
def test_fp_conserves_mass_and_momentum(ratio):
    g = build_grid(8, 128, 1.0, 8.0)
    f = double_bump(g)
    out = fokker_planck_step(f, ratio * 0.01, 0.01)
    m0, m1 = moments(f), moments(out)
    assert np.allclose(m1.rho, m0.rho, rtol=1e-12, atol=0)
    assert np.allclose(m1.momentum, m0.momentum, rtol=1e-12, atol=1e-12 * m0.rho.max())
    assert out.values.min() >= 0.0


def test_fp_stiff_limit_projects_onto_maxwellian():
    g = build_grid(8, 128, 1.0, 8.0)
    f = double_bump(g)
    out = fokker_planck_step(f, 1.0, 1e-6)
    mom = moments(f)
    dist = _l1_per_cell(out.values, maxwellian(g, mom.rho, mom.u).values, g.dv)
    assert dist.max() < 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**20), log_ratio=st.floats(-2, 6))
def test_fp_random_fields_stay_admissible(seed, log_ratio):
    g = build_grid(3, 32, 1.0, 6.0)
    vals = np.random.default_rng(seed).uniform(0, 1, (3, 32)) ** 3
    f = KineticField(g, vals)
    out = fokker_planck_step(f, 10.0**log_ratio, 1.0)
    assert out.values.min() >= 0.0
    m0, m1 = moments(f), moments(out)
    assert np.allclose(m1.rho, m0.rho, rtol=1e-12)
    assert np.allclose(m1.momentum, m0.momentum, rtol=1e-10, atol=1e-12)


def test_fp_relaxation_monotone_in_stiffness():
    g = build_grid(4, 128, 1.0, 8.0)
    f = double_bump(g)
    mom = moments(f)
    target = maxwellian(g, mom.rho, mom.u).values
    dists = []
    for eps in (1e-2, 1e-4, 1e-6):
        out = fokker_planck_step(f, 1e-3, eps)
        assert np.all(np.isfinite(out.values)) and out.values.min() >= 0
        dists.append(np.abs(out.values - target).sum() * g.dx * g.dv)
    assert dists[0] >= dists[1] >= dists[2]


def _weighted_deviation(f, m):
    return np.sqrt(np.sum((f - m) ** 2 / m))


@pytest.mark.parametrize("ratio", [0.1, 0.25, 0.5])
def test_fp_relaxation_rate_matches_spectral_gap(ratio):
    g = build_grid(1, 256, 1.0, 8.0)
    xi = g.xi
    m = maxwellian(g, 1.0, 0.0).values
    f = KineticField(g, m * (1 + 0.05 * xi + 0.02 * (xi**2 - 1)))
    eps = 0.01
    dev = _weighted_deviation(f.values, m)
    for _ in range(5):
        f = fokker_planck_step(f, ratio * eps, eps, u=0.0)
        new = _weighted_deviation(f.values, m)
        assert new / dev == pytest.approx(np.exp(-ratio), rel=0.2)
        dev = new


def test_fp_rejects_bad_arguments():
    g = build_grid(2, 8, 1.0, 4.0)
    f = maxwellian(g, 1.0, 0.0)
    with pytest.raises(ValueError):
        fokker_planck_step(f, 0.1, 0.0)
    with pytest.raises(ValueError):
        fokker_planck_step(f, -0.1, 1.0)


# -- composite step ---------------------------------------------------------


def test_kinetic_step_config_validation():
    with pytest.raises(ValueError):
        KineticStepConfig(0.0)
    with pytest.raises(ValueError):
        KineticStepConfig(0.1, splitting="ruth")
    with pytest.raises(ValueError):
        KineticStepConfig(0.1, cfl_transport=1.5)


@pytest.mark.parametrize("splitting", ["strang", "lie"])
def test_kinetic_step_uniform_maxwellian_keeps_moments(splitting):
    g = build_grid(8, 128, 1.0, 8.0)
    f = maxwellian(g, 1.2, 0.3)
    fluid = FluidState.from_velocity(g, 1.0, 0.3)
    dt = max_kinetic_dt(g, fluid.v)
    params = _params()
    # transport and relaxation leave the uniform Maxwellian untouched
    assert np.abs(transport_step_x(f, dt).values - f.values).max() == 0.0
    assert np.abs(fokker_planck_step(f, dt, params.epsilon).values - f.values).max() <= 1e-13
    out = kinetic_step(f, fluid, KineticStepConfig(dt, splitting=splitting), params)
    m0, m1 = moments(f), moments(out)
    assert np.allclose(m1.rho, m0.rho, rtol=1e-10, atol=0)
    # upwind drag exchanges momentum with an O(dv) quadrature error
    assert np.abs(m1.momentum - m0.momentum).max() <= dt * g.dv * m0.rho.max()
    # the diffusion-free drag cools the Maxwellian by O(dt); relaxation repairs it
    change = np.abs(out.values - f.values).max() / f.values.max()
    assert change <= 2 * dt


def test_kinetic_step_mass_drift_over_many_steps():
    g = build_grid(16, 32, 1.0, 6.0)
    x = g.x
    f = maxwellian(g, 1 + 0.2 * np.sin(2 * np.pi * x), 0.3 * np.cos(2 * np.pi * x))
    fluid = FluidState.from_velocity(g, 1.0, -0.2 * np.sin(2 * np.pi * x))
    cfg = KineticStepConfig(0.9 * g.dx / g.vmax)
    m0 = f.mass
    for _ in range(1000):
        f = kinetic_step(f, fluid, cfg, _params())
    assert abs(f.mass - m0) / m0 < 1e-9


def test_kinetic_step_cfl_rejected():
    g = build_grid(8, 16, 1.0, 4.0)
    f = maxwellian(g, 1.0, 0.0)
    fluid = FluidState.from_velocity(g, 1.0, 0.0)
    with pytest.raises(CFLError):
        kinetic_step(f, fluid, KineticStepConfig(2 * g.dx / g.vmax), _params())


def test_stiff_kinetic_moments_follow_isothermal_euler_with_drag():
    g = build_grid(128, 128, 1.0, 8.0)
    x = g.x
    rho, u = 1 + 0.2 * np.sin(2 * np.pi * x), 0.1 * np.sin(2 * np.pi * x)
    n, v = 1 + 0.2 * np.cos(2 * np.pi * x), -0.1 * np.sin(2 * np.pi * x)
    params = _params(eps=1e-4)
    dt = 0.9 * g.dx / g.vmax
    f = maxwellian(g, rho, u)
    fluid = FluidState.from_velocity(g, n, v)
    out = moments(kinetic_step(f, fluid, KineticStepConfig(dt), params))
    # kinetic phase of the limit system: drop the fluid feedback by freezing (n, w)
    U = MixtureState.from_primitive(g, rho, u, n, v)
    lim = limit_step(U, FluidStepConfig(dt), params)
    before = moments(f)
    d_kin = np.concatenate([out.rho - before.rho, out.momentum - before.momentum])
    d_lim = np.concatenate([lim.rho - U.rho, lim.m - U.m])
    rel = np.abs(d_kin - d_lim).sum() / np.abs(d_lim).sum()
    assert rel < 0.1
