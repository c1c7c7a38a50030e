"""Grids, discrete fields, velocity moments and midpoint quadrature.

Everything here is an immutable value object: arrays handed to the
constructors are copied and frozen, so states can be shared freely between
solvers, diagnostics and threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import VacuumError

#: Densities below this are treated as vacuum when forming ``u = rho u / rho``.
VACUUM_FLOOR = 1e-14

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = np.broadcast_to(arr, shape).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhaseGrid:
    """Periodic interval ``[0, length)`` times the velocity box ``[-vmax, vmax]``."""

    nx: int
    nv: int
    length: float
    vmax: float

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen((np.arange(self.nx) + 0.5) * self.dx)

    @cached_property
    def xi(self) -> np.ndarray:
        # built from the symmetric offset so that xi[j] == -xi[nv-1-j] exactly
        k = np.arange(self.nv) - (self.nv - 1) / 2.0
        return _frozen(k * self.dv)

    @cached_property
    def xi_faces(self) -> np.ndarray:
        """Interior velocity faces ``xi_{j+1/2}``, ``j = 0 .. nv-2``."""
        k = np.arange(1, self.nv) - self.nv / 2.0
        return _frozen(k * self.dv)

    def refine(self, factor: int) -> PhaseGrid:
        """Same domain with ``factor`` times more spatial cells."""
        return PhaseGrid(self.nx * factor, self.nv, self.length, self.vmax)


def build_grid(nx: int, nv: int, length: float, vmax: float) -> PhaseGrid:
    """Validate the sizes and build a :class:`PhaseGrid`.

    ``nv`` must be even so that ``xi = 0`` is a cell face and the velocity
    centers come in symmetric pairs.
    """
    if int(nx) != nx or int(nv) != nv:
        raise ValueError("nx and nv must be integers")
    if nx <= 0 or nv <= 0:
        raise ValueError(f"grid sizes must be positive, got nx={nx}, nv={nv}")
    if nv % 2:
        raise ValueError(f"nv must be even, got {nv}")
    if not (length > 0 and vmax > 0):
        raise ValueError(f"length and vmax must be positive, got {length}, {vmax}")
    return PhaseGrid(int(nx), int(nv), float(length), float(vmax))


@dataclass(frozen=True, eq=False)
class KineticField:
    """Nonnegative phase-space density sampled at cell centers, shape ``(nx, nv)``."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.nx, self.grid.nv):
            raise ValueError(
                f"values shape {vals.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.nv})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("kinetic field contains non-finite values")
        if vals.size and vals.min() < 0.0:
            raise ValueError(f"kinetic field is negative (min {vals.min():.3e})")
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.dx * self.grid.dv)


@dataclass(frozen=True, eq=False)
class FluidState:
    """Fluid density ``n`` and momentum ``w = n v`` per spatial cell."""

    grid: PhaseGrid
    n: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        shape = (self.grid.nx,)
        n = _frozen(self.n, shape)
        w = _frozen(self.w, shape)
        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(w))):
            raise ValueError("fluid state contains non-finite values")
        if n.min() <= 0.0:
            raise VacuumError(f"fluid density must be positive (min {n.min():.3e})")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_velocity(cls, grid: PhaseGrid, n, v) -> FluidState:
        n = np.broadcast_to(np.asarray(n, dtype=float), (grid.nx,))
        return cls(grid, n, n * np.asarray(v, dtype=float))

    @property
    def v(self) -> np.ndarray:
        return self.w / self.n


@dataclass(frozen=True, eq=False)
class MixtureState:
    """State ``U = (rho, m, n, w)`` of the two-phase limit system."""

    grid: PhaseGrid
    rho: np.ndarray
    m: np.ndarray
    n: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        shape = (self.grid.nx,)
        for name in ("rho", "m", "n", "w"):
            arr = _frozen(getattr(self, name), shape)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"mixture field {name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if self.rho.min() <= 0.0 or self.n.min() <= 0.0:
            raise VacuumError(
                f"mixture densities must be positive "
                f"(min rho {self.rho.min():.3e}, min n {self.n.min():.3e})"
            )

    @classmethod
    def from_primitive(cls, grid: PhaseGrid, rho, u, n, v) -> MixtureState:
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (grid.nx,))
        n = np.broadcast_to(np.asarray(n, dtype=float), (grid.nx,))
        return cls(grid, rho, rho * np.asarray(u), n, n * np.asarray(v))

    @property
    def u(self) -> np.ndarray:
        return self.m / self.rho

    @property
    def v(self) -> np.ndarray:
        return self.w / self.n

    def as_array(self) -> np.ndarray:
        """Conserved variables stacked as shape ``(4, nx)``."""
        return np.stack([self.rho, self.m, self.n, self.w])

    def fluid(self) -> FluidState:
        return FluidState(self.grid, self.n, self.w)


@dataclass(frozen=True)
class ViscosityModel:
    """``nu(n) = nu0`` (constant) or ``nu(n) = nu0 + nu1 * n`` (affine).

    ``nu_star`` and ``nu_lip`` default to the sharp constants ``nu0`` and
    ``nu1``. ``c0`` is the domination constant in ``n**2 <= c0 nu(n) p(n)``;
    it stays ``None`` for the constant kind, where that condition is not used.
    """

    kind: str
    nu0: float
    nu1: float = 0.0
    nu_star: float | None = None
    nu_lip: float | None = None
    c0: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "affine"):
            raise ValueError(f"unknown viscosity kind {self.kind!r}")
        if self.kind == "constant" and self.nu1 != 0.0:
            raise ValueError("constant viscosity takes no nu1")
        if self.nu_star is None:
            object.__setattr__(self, "nu_star", float(self.nu0))
        if self.nu_lip is None:
            object.__setattr__(self, "nu_lip", float(self.nu1))
        if not self.nu_star > 0:
            raise ValueError("nu_star must be positive")
        if self.nu0 < self.nu_star:
            raise ValueError(f"nu0={self.nu0} is below the lower bound nu_star={self.nu_star}")
        if self.nu1 < 0:
            raise ValueError("nu1 must be nonnegative")
        if self.nu1 > self.nu_lip:
            raise ValueError(f"nu1={self.nu1} exceeds the Lipschitz constant {self.nu_lip}")

    @classmethod
    def constant(cls, nu0: float) -> ViscosityModel:
        return cls("constant", float(nu0))

    @classmethod
    def affine(cls, nu0: float = 1.0, nu1: float = 1.0, c0: float | None = None) -> ViscosityModel:
        return cls("affine", float(nu0), float(nu1), c0=c0)

    def __call__(self, n):
        return self.nu0 + self.nu1 * np.asarray(n, dtype=float)

    def domination_violations(self, gamma: float, c0: float, rmax: float = 100.0,
                              samples: int = 10_000, seed: int = 0) -> int:
        """Count samples ``r in [0, rmax]`` with ``r**2 > c0 nu(r) r**gamma``."""
        r = np.random.default_rng(seed).uniform(0.0, rmax, samples)
        lhs = r**2
        rhs = c0 * self(r) * r**gamma
        return int(np.count_nonzero(lhs > rhs * (1 + 1e-12) + 1e-300))


@dataclass(frozen=True)
class ModelParams:
    """Pressure exponent, viscosity law, far-field density and stiffness."""

    gamma: float
    viscosity: ViscosityModel
    n_infty: float = 1.0
    epsilon: float = 0.05

    def __post_init__(self):
        if not 1.0 <= self.gamma <= 2.0:
            raise ValueError(f"gamma must lie in [1, 2], got {self.gamma}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.n_infty > 0:
            raise ValueError("n_infty must be positive")
        visc = self.viscosity
        if visc.kind == "affine":
            c0 = visc.c0
            if c0 is None and visc.nu0 == 1.0 and visc.nu1 == 1.0:
                c0 = max(self.gamma - 1.0, 2.0 - self.gamma)
                object.__setattr__(self, "viscosity", ViscosityModel.affine(1.0, 1.0, c0))
            if c0 is not None and visc.domination_violations(self.gamma, c0):
                raise ValueError(
                    f"viscosity does not satisfy n^2 <= c0 nu(n) p(n) with c0={c0}"
                )

    def with_epsilon(self, epsilon: float) -> ModelParams:
        return ModelParams(self.gamma, self.viscosity, self.n_infty, epsilon)

    def pressure(self, n):
        return np.asarray(n, dtype=float) ** self.gamma


def maxwellian(grid: PhaseGrid, rho, u) -> KineticField:
    """Unit-temperature Maxwellian ``rho (2 pi)^(-1/2) exp(-(xi - u)^2 / 2)``."""
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (grid.nx,))
    u = np.broadcast_to(np.asarray(u, dtype=float), (grid.nx,))
    if rho.min() <= 0.0:
        raise ValueError("maxwellian density must be positive")
    c = grid.xi[None, :] - u[:, None]
    return KineticField(grid, rho[:, None] * _INV_SQRT_2PI * np.exp(-0.5 * c * c))


class Moments(NamedTuple):
    rho: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return bulk_velocity(self.rho, self.momentum)


def bulk_velocity(rho, momentum) -> np.ndarray:
    return np.asarray(momentum) / np.maximum(rho, VACUUM_FLOOR)


def moments(f: KineticField) -> Moments:
    """Zeroth, first and second velocity moments per spatial cell."""
    xi, dv = f.grid.xi, f.grid.dv
    vals = f.values
    return Moments(vals.sum(axis=1) * dv, vals @ xi * dv, vals @ (xi * xi) * dv)


def integrate_x(grid: PhaseGrid, values) -> float:
    """Midpoint rule over the periodic interval."""
    return float(np.sum(values) * grid.dx)


def integrate_phase(grid: PhaseGrid, values) -> float:
    return float(np.sum(values) * grid.dx * grid.dv)


def cell_average(values, factor: int) -> np.ndarray:
    """Restrict a fine periodic field by averaging groups of ``factor`` cells."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] % factor:
        raise ValueError("fine size is not a multiple of the restriction factor")
    return values.reshape(*values.shape[:-1], -1, factor).mean(axis=-1)


def restrict(state: MixtureState, coarse: PhaseGrid) -> MixtureState:
    """Average the conserved variables of a fine mixture onto ``coarse``."""
    factor, rem = divmod(state.grid.nx, coarse.nx)
    if rem or factor < 1:
        raise ValueError("fine grid must refine the coarse grid by an integer factor")
    return MixtureState(coarse, *(cell_average(a, factor) for a in state.as_array()))
