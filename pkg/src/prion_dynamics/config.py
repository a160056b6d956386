"""Scenario files: line-oriented ``key = value`` pairs with ``#`` comments.

Example::

    lambda = 10
    gamma = 1
    tau = 1
    beta = 1
    mu = 1
    x0 = 1
    density = scaled_u_star(0.5)
    solvers = ode, pide
    t_end = 100
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParseError, ValidationError
from .io import fmt
from .model import (DISEASE, DISEASE_FREE, ORIGINAL, Density, Grid, OdeState, Params, regime_of,
                    stationary_density)
from .pide import moments

PARAM_KEYS = ("lambda", "gamma", "tau", "beta", "mu", "x0")
SOLVERS = ("ode", "pide", "characteristics")
PROFILE_ARITY = {"zero": 0, "indicator": 3, "scaled_u_star": 1, "gaussian": 3}

_PROFILE_RE = re.compile(r"^([a-z_]+)\s*(?:\((.*)\))?$")


@dataclass(frozen=True)
class DensityProfile:
    kind: str = "zero"
    args: tuple = ()

    def __post_init__(self):
        if self.kind not in PROFILE_ARITY:
            raise ValidationError(f"unknown density profile {self.kind!r}", field="density")
        if len(self.args) != PROFILE_ARITY[self.kind]:
            raise ValidationError(f"{self.kind} takes {PROFILE_ARITY[self.kind]} arguments, got {len(self.args)}",
                                  field="density")
        object.__setattr__(self, "args", tuple(float(a) for a in self.args))
        if self.kind == "indicator":
            lo, hi, height = self.args
            if not (hi > lo and height >= 0):
                raise ValidationError("indicator needs lo < hi and height >= 0", field="density")
        elif self.kind == "scaled_u_star":
            if self.args[0] < 0:
                raise ValidationError("scaled_u_star factor must be nonnegative", field="density")
        elif self.kind == "gaussian":
            _, width, mass = self.args
            if not (width > 0 and mass >= 0):
                raise ValidationError("gaussian needs width > 0 and mass >= 0", field="density")

    def text(self) -> str:
        if not self.args:
            return self.kind
        return f"{self.kind}({', '.join(fmt(a) for a in self.args)})"

    def sample(self, p: Params, grid: Grid) -> Density:
        """Original-frame samples with the inflow value u(x0) = 0 imposed."""
        x = grid.nodes
        if self.kind == "zero":
            vals = np.zeros_like(x)
        elif self.kind == "indicator":
            lo, hi, height = self.args
            vals = np.where((x >= lo) & (x <= hi), height, 0.0)
        elif self.kind == "scaled_u_star":
            vals = self.args[0] * stationary_density(p, grid).values
        else:
            c, width, mass = self.args
            vals = mass / (width * math.sqrt(2 * math.pi)) * np.exp(-0.5 * ((x - c) / width) ** 2)
        vals = np.array(vals, dtype=float)
        vals[0] = 0.0
        return Density(grid, vals, ORIGINAL)


@dataclass(frozen=True)
class ScenarioConfig:
    params: Params
    regime: str | None = None
    V0: float | None = None
    ode_init: tuple | None = None
    density: DensityProfile = field(default_factory=DensityProfile)
    x_max: float | None = None
    n: int = 2000
    t_end: float = 100.0
    dt: float | None = None
    snapshot_every: float | None = None
    solvers: tuple = ("ode",)
    out: str = "out"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 0.5

    @property
    def resolved_regime(self) -> str:
        return regime_of(self.params) if self.regime is None else self.regime

    @property
    def grid(self) -> Grid:
        x_max = self.params.x0 + 50.0 if self.x_max is None else self.x_max
        return Grid(self.params.x0, x_max, self.n)

    @property
    def initial_V(self) -> float:
        return self.params.lam / self.params.gamma if self.V0 is None else self.V0

    def initial_density(self) -> Density:
        return self.density.sample(self.params, self.grid)

    def initial_ode_state(self) -> OdeState:
        """``ode_init`` if given, else the moments of the initial density with V0."""
        if self.ode_init is not None:
            return OdeState(*self.ode_init)
        U, P = moments(self.initial_density())
        return OdeState(U, self.initial_V, P)


# --------------------------------------------------------------------------- parsing


def _float(value, key, line):
    try:
        out = float(value)
    except ValueError:
        raise ValidationError(f"line {line}: {key} must be a number, got {value!r}", field=key) from None
    if not math.isfinite(out):
        raise ValidationError(f"line {line}: {key} must be finite", field=key)
    return out


def _positive(value, key, line):
    out = _float(value, key, line)
    if not out > 0:
        raise ValidationError(f"line {line}: {key} must be positive, got {value!r}", field=key)
    return out


def _int(value, key, line):
    try:
        out = int(value)
    except ValueError:
        raise ValidationError(f"line {line}: {key} must be an integer, got {value!r}", field=key) from None
    return out


def _profile(value, line):
    m = _PROFILE_RE.match(value)
    if not m:
        raise ParseError(f"cannot parse density profile {value!r}", line)
    kind, inner = m.group(1), m.group(2)
    args = []
    if inner is not None and inner.strip():
        args = [_float(a.strip(), "density", line) for a in inner.split(",")]
    return DensityProfile(kind, tuple(args))


def _solvers(value, line):
    names = tuple(s.strip() for s in value.split(",") if s.strip())
    if not names:
        raise ValidationError(f"line {line}: solvers must not be empty", field="solvers")
    if names == ("all",):
        return SOLVERS
    for s in names:
        if s not in SOLVERS:
            raise ValidationError(f"line {line}: unknown solver {s!r}", field="solvers")
    return names


def _ode_init(value, line):
    parts = [s.strip() for s in value.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"line {line}: ode_init needs three numbers U, V, P", field="ode_init")
    return tuple(_float(s, "ode_init", line) for s in parts)


def _regime(value, line):
    if value not in (DISEASE, DISEASE_FREE):
        raise ValidationError(f"line {line}: regime must be {DISEASE_FREE!r} or {DISEASE!r}", field="regime")
    return value


_FIELDS = {
    "regime": _regime,
    "V0": lambda v, line: _float(v, "V0", line),
    "ode_init": _ode_init,
    "density": _profile,
    "x_max": lambda v, line: _float(v, "x_max", line),
    "n": lambda v, line: _int(v, "n", line),
    "t_end": lambda v, line: _positive(v, "t_end", line),
    "dt": lambda v, line: _positive(v, "dt", line),
    "snapshot_every": lambda v, line: _positive(v, "snapshot_every", line),
    "solvers": _solvers,
    "out": lambda v, line: v,
    "rel_tol": lambda v, line: _positive(v, "rel_tol", line),
    "abs_tol": lambda v, line: _positive(v, "abs_tol", line),
    "max_step": lambda v, line: _positive(v, "max_step", line),
}


def parse_config(text: str) -> ScenarioConfig:
    raw_params = {}
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("missing key", lineno)
        if key in lines:
            raise ParseError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        lines[key] = lineno
        if key in PARAM_KEYS:
            raw_params[key] = _float(value, key, lineno)
        elif key in _FIELDS:
            values[key] = _FIELDS[key](value, lineno)
        else:
            raise ParseError(f"unknown key {key!r}", lineno)

    missing = [k for k in PARAM_KEYS if k not in raw_params]
    if missing:
        raise ValidationError(f"missing model constants: {', '.join(missing)}",
                              field=missing[0] if len(missing) == 1 else ",".join(missing))
    params = Params.from_mapping(raw_params)
    cfg = ScenarioConfig(params=params, **values)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig):
    if cfg.n < 2:
        raise ValidationError("n must be at least 2", field="n")
    x_max = cfg.params.x0 + 50.0 if cfg.x_max is None else cfg.x_max
    if not x_max > cfg.params.x0:
        raise ValidationError("x_max must exceed x0", field="x_max")
    if cfg.V0 is not None and cfg.V0 < 0:
        raise ValidationError("V0 must be nonnegative", field="V0")
    if cfg.ode_init is not None:
        U, V, P = cfg.ode_init
        if U < 0 or V < 0 or P < cfg.params.x0 * U:
            raise ValidationError("ode_init must satisfy U >= 0, V >= 0, P >= x0 U", field="ode_init")
    if cfg.density.kind == "scaled_u_star" and regime_of(cfg.params) != DISEASE:
        raise ValidationError("scaled_u_star needs supercritical parameters", field="density")
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: ScenarioConfig) -> str:
    """Serialise so that ``parse_config(format_config(cfg)) == cfg``."""
    out = [f"{k} = {fmt(v)}" for k, v in cfg.params.as_dict().items()]
    defaults = ScenarioConfig(params=cfg.params)
    for name in _FIELDS:
        value = getattr(cfg, name)
        if value is None or value == getattr(defaults, name):
            continue
        if name == "density":
            text = value.text()
        elif name == "solvers":
            text = ", ".join(value)
        elif name == "ode_init":
            text = ", ".join(fmt(v) for v in value)
        elif name in ("regime", "out"):
            text = value
        elif name == "n":
            text = str(value)
        else:
            text = fmt(value)
        out.append(f"{name} = {text}")
    return "\n".join(out) + "\n"


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    return validate_config(replace(cfg, **changes))
