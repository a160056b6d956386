"""Parameters, closed-form equilibria and the shared grid/density types.

Two coordinate frames are used throughout:

* ``original``: polymer length x in [x0, x_max]; model-level objects
  (stationary density, PIDE states) live here.
* ``shifted``: s = x - x0 in [0, x_max - x0]; the operator calculus and the
  evolution operators live here, with mu0 = mu + beta*x0 absorbing the shift.

Every :class:`Density` carries its frame tag and frame changes are explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import SubcriticalParameters, ValidationError
from .quadrature import trapezoid, trapezoid_weights

CRITICAL_TOL = 1e-12
ORIGINAL = "original"
SHIFTED = "shifted"
DISEASE_FREE = "disease_free"
DISEASE = "disease"


class Threshold(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Params:
    """The six positive model constants.

    ``lam`` is the monomer source rate (``lambda`` is a Python keyword).
    """

    lam: float
    gamma: float
    tau: float
    beta: float
    mu: float
    x0: float

    def __post_init__(self):
        for name in ("lam", "gamma", "tau", "beta", "mu", "x0"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                label = "lambda" if name == "lam" else name
                raise ValidationError(f"{label} must be a positive finite number, got {value!r}", field=label)

    @classmethod
    def from_mapping(cls, values):
        data = dict(values)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**{k: float(v) for k, v in data.items()})

    def as_dict(self):
        return {"lambda": self.lam, "gamma": self.gamma, "tau": self.tau,
                "beta": self.beta, "mu": self.mu, "x0": self.x0}

    @property
    def mu0(self):
        return self.mu + self.beta * self.x0

    @property
    def R(self):
        return self.lam * self.beta * self.tau / (self.gamma * self.mu0 ** 2)


@dataclass(frozen=True)
class DerivedConstants:
    mu0: float
    a: float
    omega_inf: float
    R: float


class OdeState(NamedTuple):
    U: float
    V: float
    P: float


def derive_constants(p: Params, regime: str, a: float | None = None) -> DerivedConstants:
    """Derived constants for the disease-free or disease regime.

    ``a`` is the norm weight; it defaults to mu0/beta and, when given, must lie
    in [omega_inf/mu0, mu0/beta] whenever that interval is nonempty.
    """
    mu0 = p.mu0
    if regime == DISEASE_FREE:
        omega_inf = p.lam * p.tau / p.gamma
    elif regime == DISEASE:
        omega_inf = mu0 ** 2 / p.beta
    else:
        raise ValueError(f"unknown regime {regime!r}")
    if a is None:
        a = mu0 / p.beta
    else:
        lo, hi = omega_inf / mu0, mu0 / p.beta
        if lo <= hi and not (lo - 1e-12 <= a <= hi + 1e-12):
            raise ValidationError(f"a={a} outside admissible interval [{lo}, {hi}]", field="a")
    return DerivedConstants(mu0=mu0, a=float(a), omega_inf=omega_inf, R=p.R)


def regime_of(p: Params) -> str:
    return DISEASE if threshold_classify(p) is Threshold.SUPERCRITICAL else DISEASE_FREE


def threshold_classify(p: Params, tol: float = CRITICAL_TOL) -> Threshold:
    R = p.R
    if abs(R - 1.0) < tol:
        return Threshold.CRITICAL
    return Threshold.SUPERCRITICAL if R > 1.0 else Threshold.SUBCRITICAL


def _require_supercritical(p):
    if threshold_classify(p) is not Threshold.SUPERCRITICAL:
        raise SubcriticalParameters(f"R = {p.R:.17g} <= 1: no disease equilibrium")


def disease_free_equilibrium(p: Params, grid: Grid | None = None):
    """Return (V, u) = (lambda/gamma, 0)."""
    V = p.lam / p.gamma
    if grid is None:
        grid = default_grid(p)
    return V, Density.zeros(grid)


def disease_equilibrium_ode(p: Params) -> OdeState:
    _require_supercritical(p)
    mu0 = p.mu0
    excess = p.lam * p.beta * p.tau - p.gamma * mu0 ** 2
    U = excess / (p.mu * p.tau * (p.mu + 2 * p.beta * p.x0))
    V = mu0 ** 2 / (p.beta * p.tau)
    P = excess / (p.beta * p.mu * p.tau)
    return OdeState(U, V, P)


def phi(r):
    """(r + r^2/2) exp(-(r + r^2/2)); maximum e^-1 at r + r^2/2 = 1."""
    r = np.asarray(r, dtype=float)
    q = r + 0.5 * r * r
    return q * np.exp(-q)


def phi_prime(r):
    r = np.asarray(r, dtype=float)
    q = r + 0.5 * r * r
    return (1.0 + r) * (1.0 - q) * np.exp(-q)


def phi_second(r):
    r = np.asarray(r, dtype=float)
    q = r + 0.5 * r * r
    return np.exp(-q) * ((1.0 - q) - (1.0 + r) ** 2 * (2.0 - q))


def stationary_coefficient(p: Params) -> float:
    _require_supercritical(p)
    mu0 = p.mu0
    excess = p.lam * p.beta * p.tau - p.gamma * mu0 ** 2
    return 2 * p.beta / (p.mu * p.tau) * excess / (mu0 * (p.mu + 2 * p.beta * p.x0))


def stationary_density(p: Params, grid: Grid) -> Density:
    """Disease-equilibrium polymer density sampled on an original-frame grid."""
    if not math.isclose(grid.x_left, p.x0, rel_tol=0, abs_tol=1e-12 * max(1.0, p.x0)):
        raise ValueError("stationary_density needs an original-frame grid starting at x0")
    c = stationary_coefficient(p)
    values = c * phi(p.beta * (grid.nodes - p.x0) / p.mu0)
    return Density(grid, values, ORIGINAL)


def stationary_density_prime(p: Params, grid: Grid) -> np.ndarray:
    c = stationary_coefficient(p)
    return c * p.beta / p.mu0 * phi_prime(p.beta * (grid.nodes - p.x0) / p.mu0)


class KernelCheck(NamedTuple):
    norm_residual: float
    symmetry_residual: float
    mass_residual: float
    degenerate: bool


def splitting_kernel(y, x, x0):
    """Equidistributed splitting kernel: 1/x on 0 < y < x when x > x0."""
    y = np.asarray(y, dtype=float)
    if x <= x0:
        return np.zeros_like(y)
    return np.where((y > 0) & (y < x), 1.0 / x, 0.0)


def validate_splitting_kernel(x: float, x0: float, n_quad: int = 1000) -> KernelCheck:
    """Residuals of the three kernel identities at chain length x."""
    if x <= x0:
        return KernelCheck(1.0, 0.0, x, True)
    y = np.linspace(0.0, x, n_quad + 1)
    dy = x / n_quad
    # the open-interval indicator drops the endpoints; use the interior limit there
    k = np.full_like(y, 1.0 / x)
    inner = splitting_kernel(y[1:-1], x, x0)
    k[1:-1] = inner
    norm_res = abs(trapezoid(k, dy) - 1.0)
    sym_res = float(np.max(np.abs(splitting_kernel(y[1:-1], x, x0) - splitting_kernel(x - y[1:-1], x, x0))))
    mass_res = abs(2.0 * trapezoid(y * k, dy) - x)
    return KernelCheck(norm_res, sym_res, mass_res, False)


def moment_matrix_eigenvalues(p: Params, omega_inf: float):
    root = math.sqrt(p.beta * omega_inf)
    return -p.mu0 + root, -p.mu0 - root


def decay_rate_bound(p: Params) -> float:
    """mu0 - sqrt(lambda*beta*tau/gamma): exponential rate in the disease-free case."""
    return p.mu0 - math.sqrt(p.lam * p.beta * p.tau / p.gamma)


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform truncation of the length axis with trapezoid weights."""

    x_left: float
    x_max: float
    n: int

    def __post_init__(self):
        if not self.x_max > self.x_left:
            raise ValidationError("x_max must exceed x_left", field="x_max")
        if self.n < 2:
            raise ValidationError("n must be at least 2", field="n")
        object.__setattr__(self, "_nodes", np.linspace(self.x_left, self.x_max, self.n + 1))
        self._nodes.setflags(write=False)

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_left) / self.n

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.n + 1, self.dx)

    @property
    def length(self) -> float:
        return self.x_max - self.x_left

    def shifted(self, x0: float) -> Grid:
        return Grid(self.x_left - x0, self.x_max - x0, self.n)

    def spec(self):
        return {"x_left": self.x_left, "x_max": self.x_max, "n": self.n}

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.x_left, self.x_max, self.n) == (other.x_left, other.x_max, other.n)

    def __hash__(self):
        return hash((self.x_left, self.x_max, self.n))

    def __repr__(self):
        return f"Grid(x_left={self.x_left!r}, x_max={self.x_max!r}, n={self.n!r})"


def default_grid(p: Params, n: int = 2000, span: float | None = None) -> Grid:
    """Original-frame grid on [x0, x0 + 25*mu0/beta] unless ``span`` is given."""
    if span is None:
        span = 25.0 * p.mu0 / p.beta
    return Grid(p.x0, p.x0 + span, n)


@dataclass(frozen=True, eq=False)
class Density:
    grid: Grid
    values: np.ndarray
    frame: str = ORIGINAL

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got shape {values.shape}")
        if self.frame not in (ORIGINAL, SHIFTED):
            raise ValueError(f"unknown frame {self.frame!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid, frame=ORIGINAL):
        return cls(grid, np.zeros(grid.n + 1), frame)

    @classmethod
    def from_function(cls, grid, fn, frame=ORIGINAL):
        return cls(grid, fn(grid.nodes), frame)

    @property
    def x(self):
        return self.grid.nodes

    def with_values(self, values):
        return Density(self.grid, values, self.frame)

    def to_shifted(self, x0: float) -> Density:
        if self.frame == SHIFTED:
            return self
        return Density(self.grid.shifted(x0), self.values, SHIFTED)

    def to_original(self, x0: float) -> Density:
        if self.frame == ORIGINAL:
            return self
        return Density(self.grid.shifted(-x0), self.values, ORIGINAL)

    def integral(self, corrected=False):
        return trapezoid(self.values, self.grid.dx, corrected)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__


def _check_compatible(u, v):
    if u.grid != v.grid or u.frame != v.frame:
        raise ValueError("densities live on different grids or frames")


def weighted_norm(u: Density, a: float, corrected: bool = False) -> float:
    """a*|u|_1 + |x u|_1, with x measured from the left end of the domain.

    In the shifted frame the weight is a + x. In the original frame it is
    a + (x - x_left), i.e. the same norm after the frame shift.
    """
    s = u.grid.nodes - (u.grid.x_left if u.frame == ORIGINAL else 0.0)
    return trapezoid((a + s) * np.abs(u.values), u.grid.dx, corrected)


def weighted_functional(u: Density, a: float, corrected: bool = False) -> float:
    """Signed integral of (a + s) u, s the shifted coordinate."""
    s = u.grid.nodes - (u.grid.x_left if u.frame == ORIGINAL else 0.0)
    return trapezoid((a + s) * u.values, u.grid.dx, corrected)


def relative_weighted_error(u: Density, ref: Density, a: float) -> float:
    return weighted_norm(u - ref, a) / weighted_norm(ref, a)
