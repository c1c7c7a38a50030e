"""Flat ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment, and keys are dotted names
from :data:`SCHEMA`. Unknown keys, duplicates and malformed values are
errors. Example::

    grid.nx = 128
    model.gamma = 1.5
    run.epsilon = 0.05
    run.dt = auto
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from ..phase_space import ModelParams, ViscosityModel, build_grid
from .initial_data import RECIPES


class ConfigError(ValueError):
    pass


def _pos_int(text):
    val = int(text)
    if val <= 0:
        raise ValueError("must be a positive integer")
    return val


def _pos_float(text):
    val = float(text)
    if not (val > 0 and math.isfinite(val)):
        raise ValueError("must be a positive number")
    return val


def _float(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError("must be finite")
    return val


def _dt(text):
    return None if text.lower() == "auto" else _pos_float(text)


def _str(text):
    return text


def _optional_pos_float(text):
    return None if text.lower() in ("auto", "none") else _pos_float(text)


# key -> (parser, default)
SCHEMA = {
    "grid.nx": (_pos_int, 128),
    "grid.nv": (_pos_int, 128),
    "grid.length": (_pos_float, 1.0),
    "grid.vmax": (_pos_float, 8.0),
    "model.gamma": (_float, 1.5),
    "model.n_infty": (_pos_float, 1.0),
    "model.viscosity.kind": (_str, "affine"),
    "model.viscosity.nu0": (_pos_float, 1.0),
    "model.viscosity.nu1": (_float, 1.0),
    "run.epsilon": (_pos_float, 0.05),
    "run.t_final": (_pos_float, 0.5),
    "run.dt": (_dt, None),
    "run.recipe": (_str, "maxwellian_exact"),
    "run.amplitude": (_optional_pos_float, None),
    "run.snapshot_stride": (_pos_int, 1),
    "run.outdir": (_str, "out"),
    "run.ref_factor": (_pos_int, 4),
    "run.c_mon": (_float, 1.0),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run needs; ``dt = None`` means CFL-driven."""

    nx: int = 128
    nv: int = 128
    length: float = 1.0
    vmax: float = 8.0
    params: ModelParams = ModelParams(1.5, ViscosityModel.affine(1.0, 1.0))
    t_final: float = 0.5
    dt: float | None = None
    recipe: str = "maxwellian_exact"
    amplitude: float | None = None
    snapshot_stride: int = 1
    outdir: str | None = None
    ref_factor: int = 4
    c_mon: float = 1.0
    dump_f: bool = False
    max_steps: int | None = None

    def __post_init__(self):
        build_grid(self.nx, self.nv, self.length, self.vmax)
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.recipe not in RECIPES:
            raise ConfigError(f"unknown recipe {self.recipe!r}; expected one of {RECIPES}")
        if self.snapshot_stride < 1 or self.ref_factor < 1:
            raise ConfigError("snapshot_stride and ref_factor must be positive")
        if self.c_mon < 0:
            raise ConfigError("c_mon must be nonnegative")

    @property
    def grid(self):
        return build_grid(self.nx, self.nv, self.length, self.vmax)

    def with_epsilon(self, epsilon: float, outdir: str | None = None) -> RunConfig:
        return replace(self, params=self.params.with_epsilon(epsilon), outdir=outdir)


def parse_config(text: str) -> dict:
    """Parse config text into a ``{key: value}`` dict of the keys present."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        val = val.strip("\"'")
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def config_from_values(values: dict) -> RunConfig:
    unknown = set(values) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    v = {k: values.get(k, default) for k, (_, default) in SCHEMA.items()}
    kind = v["model.viscosity.kind"]
    try:
        if kind == "constant":
            visc = ViscosityModel.constant(v["model.viscosity.nu0"])
        elif kind == "affine":
            visc = ViscosityModel.affine(v["model.viscosity.nu0"], v["model.viscosity.nu1"])
        else:
            raise ConfigError(f"unknown viscosity kind {kind!r}")
        params = ModelParams(v["model.gamma"], visc, v["model.n_infty"], v["run.epsilon"])
        return RunConfig(
            nx=v["grid.nx"], nv=v["grid.nv"], length=v["grid.length"], vmax=v["grid.vmax"],
            params=params, t_final=v["run.t_final"], dt=v["run.dt"],
            recipe=v["run.recipe"], amplitude=v["run.amplitude"],
            snapshot_stride=v["run.snapshot_stride"], outdir=v["run.outdir"],
            ref_factor=v["run.ref_factor"], c_mon=v["run.c_mon"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    return config_from_values(parse_config(Path(path).read_text()))
