"""
Run configuration: strict JSON schema, registries, and sweep expansion.

Every block rejects unknown keys. ``parse_config`` reports all validation
problems at once through :class:`ConfigError`.
"""

from __future__ import annotations

import copy
import itertools
import json
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .spectral import FieldState, Grid1D, band_limited_random

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "expand_sweep",
    "INITIAL_CONDITIONS",
    "COEFFICIENTS",
    "build_initial",
    "build_coefficient",
]

Command = Literal["simulate", "peakon", "scale", "verify-variational", "verify-linear", "sweep"]


class ConfigError(ValueError):
    """All validation problems found in one configuration."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


# --- registries -----------------------------------------------------------

def _gaussian(grid, amplitude=1.0, center=None, width=1.0):
    c = grid.L / 2 if center is None else center
    return amplitude * np.exp(-(((grid.x - c) / width) ** 2))


def _sine(grid, amplitude=1.0, k=1, phase=0.0):
    return amplitude * np.sin(2 * np.pi * k * grid.x / grid.L + phase)


def _mollified_peakons(grid, q=(10.0, 16.0), p=(2.0, 1.0), sigma=None):
    # periodic peakon sum smoothed by a Gaussian of width sigma in Fourier space
    from .peakons import PeakonState, peakon_field

    s = PeakonState(np.array(q, float), np.array(p, float), L=grid.L)
    raw = peakon_field(s, grid).values
    sig = 4 * grid.dx if sigma is None else sigma
    h = np.fft.rfft(raw) * np.exp(-0.5 * (grid.k * sig) ** 2)
    return np.fft.irfft(h, n=grid.n)


def _random(grid, seed=0, max_mode=None, amplitude=1.0):
    f = band_limited_random(grid, np.random.default_rng(seed), max_mode)
    return amplitude * f.values


INITIAL_CONDITIONS = {
    "gaussian": _gaussian,
    "sine": _sine,
    "mollified_peakons": _mollified_peakons,
    "random": _random,
}


def _coef_constant(grid, value=0.0):
    return np.full(grid.n, float(value))


def _coef_sine(grid, mean=0.5, amplitude=0.2, k=1, phase=0.0):
    return mean + amplitude * np.sin(2 * np.pi * k * grid.x / grid.L + phase)


COEFFICIENTS = {"constant": _coef_constant, "sine": _coef_sine}


def _call_registry(registry: dict, kind: str, name: str, grid: Grid1D, params: dict) -> np.ndarray:
    try:
        func = registry[name]
    except KeyError:
        raise ValueError(f"unknown {kind} {name!r}; known: {sorted(registry)}") from None
    try:
        return np.asarray(func(grid, **params), dtype=float)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind} {name!r}: {exc}") from None


def build_initial(cfg: "RunConfig", grid: Grid1D) -> FieldState:
    ic = cfg.initial
    return FieldState(grid, _call_registry(INITIAL_CONDITIONS, "initial condition", ic.name, grid, ic.params))


def build_coefficient(cfg: "RunConfig", grid: Grid1D) -> np.ndarray:
    F = cfg.equation.F
    return _call_registry(COEFFICIENTS, "coefficient", F.name, grid, F.params)


# --- schema ---------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridConfig(_Strict):
    n: int = Field(256, ge=8)
    L: float = Field(40.0, gt=0)

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("n must be even")
        return v


class Named(_Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class EquationConfig(_Strict):
    kappa: float | None = None
    F: Named | None = None
    dealias: float | None = Field(2.0 / 3.0, gt=0, le=1)

    @model_validator(mode="after")
    def _exclusive(self):
        if self.kappa is not None and self.F is not None:
            raise ValueError("exclusive coefficient settings: give either kappa or F, not both")
        if self.F is not None and self.F.name not in COEFFICIENTS:
            raise ValueError(f"unknown coefficient {self.F.name!r}; known: {sorted(COEFFICIENTS)}")
        return self


class PeakonConfig(_Strict):
    q: list[float] = Field(default_factory=lambda: [0.0, 10.0])
    p: list[float] = Field(default_factory=lambda: [2.0, 1.0])
    L: float | None = Field(None, gt=0)
    dt: float = Field(1e-3, gt=0)
    T: float = 20.0
    record_every: int = Field(100, ge=1)

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.q) != len(self.p) or not self.q:
            raise ValueError("peakon q and p must be non-empty and of equal length")
        return self


class PhysicalConfig(_Strict):
    g: float = Field(9.81, gt=0)
    h0: float = Field(1.0, gt=0)
    a: float = Field(0.1, gt=0)
    lam: float = Field(10.0, gt=0)
    omega0: float = 0.0
    c0: float = 0.0
    rho: float = Field(1000.0, gt=0)
    p0: float = 101325.0


class LinearConfig(_Strict):
    amplitude: float = 0.1
    n: int = Field(64, ge=8)
    nz: int = Field(17, ge=3)
    times: list[float] = Field(default_factory=lambda: [0.0, 0.3, 1.1])
    tolerance: float = Field(1e-8, gt=0)


class VariationalConfig(_Strict):
    n: int = Field(128, ge=8)
    m_values: list[int] = Field(default_factory=lambda: [32, 64, 128])
    eps: float = Field(1e-3, gt=0)
    gap_tolerance: float = Field(1e-4, gt=0)
    gap_at_m: int = 64
    min_order: float = 4.0
    oracle_pairs: int = Field(10, ge=1)

    @field_validator("m_values")
    @classmethod
    def _m(cls, v):
        if not v or any(m < 8 or m % 4 for m in v):
            raise ValueError("m_values must be multiples of 4 and at least 8")
        return sorted(v)


class SweepAxis(_Strict):
    parameter: str
    values: list[Any] = Field(min_length=1)


class SweepConfig(_Strict):
    command: Literal["simulate", "peakon", "scale", "verify-variational", "verify-linear"] = "simulate"
    axes: list[SweepAxis] = Field(default_factory=list)


class RunConfig(_Strict):
    """Top-level run description.

    Defaults give a classic run with ``n = 256``, ``L = 40``, ``dt = 1e-3``.
    """

    command: Command
    grid: GridConfig = Field(default_factory=GridConfig)
    equation: EquationConfig = Field(default_factory=EquationConfig)
    initial: Named = Field(default_factory=lambda: Named(name="gaussian"))
    dt: float = Field(1e-3, gt=0)
    T: float = Field(1.0, gt=0)
    record_every: int = Field(10, ge=1)
    breaking_threshold: float = -10.0
    peakon: PeakonConfig = Field(default_factory=PeakonConfig)
    physical: PhysicalConfig = Field(default_factory=PhysicalConfig)
    linear: LinearConfig = Field(default_factory=LinearConfig)
    variational: VariationalConfig = Field(default_factory=VariationalConfig)
    sweep: SweepConfig | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _cross(self):
        if self.initial.name not in INITIAL_CONDITIONS:
            raise ValueError(f"unknown initial condition {self.initial.name!r}; "
                             f"known: {sorted(INITIAL_CONDITIONS)}")
        if self.command == "sweep" and (self.sweep is None or not self.sweep.axes):
            raise ValueError("a sweep needs at least one axis")
        return self

    @property
    def kappa(self) -> float:
        return 0.0 if self.equation.kappa is None else self.equation.kappa

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _format_error(err: dict) -> str:
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    if err["type"] == "extra_forbidden":
        msg = "unknown key"
    return f"{loc}: {msg}"


def parse_config(text: str | dict) -> RunConfig:
    """Validate JSON text (or an already-decoded mapping) into a :class:`RunConfig`."""
    if isinstance(text, (str, bytes)):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from None
    else:
        data = text
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_format_error(e) for e in exc.errors()]) from None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _set_dotted(data: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        nxt = cur.get(k)
        if nxt is None:
            nxt = cur[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError([f"sweep parameter {dotted!r}: {k!r} is not a section"])
        cur = nxt
    cur[keys[-1]] = value


def expand_sweep(cfg: RunConfig) -> list[tuple[dict, RunConfig]]:
    """Cartesian product of the sweep axes as ``(assignment, child config)`` pairs.

    Children keep the parent's settings, run ``cfg.sweep.command``, and come in
    row-major order of the axes as listed.
    """
    if cfg.sweep is None:
        raise ValueError("configuration has no sweep section")
    base = cfg.model_dump(mode="json")
    base.pop("sweep")
    base["command"] = cfg.sweep.command
    names = [a.parameter for a in cfg.sweep.axes]
    children, errors = [], []
    for combo in itertools.product(*(a.values for a in cfg.sweep.axes)):
        data = copy.deepcopy(base)
        assignment = dict(zip(names, combo))
        for k, v in assignment.items():
            _set_dotted(data, k, v)
        try:
            children.append((assignment, parse_config(data)))
        except ConfigError as exc:
            errors.extend(f"sweep point {assignment}: {e}" for e in exc.errors)
    if errors:
        raise ConfigError(errors)
    return children
