"""Solution along characteristics: the v-transform, U0/V0 and Picard iteration.

Frames: ``U0_apply``, ``V0_apply`` and the Picard routines work in the
shifted frame (s = x - x0, decay rate mu0 + beta*s). The v-field helpers
accept either frame and keep the tag of their input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import NoiseDominated, OutOfBoundaryRegion
from .model import ORIGINAL, SHIFTED, Density, Grid, Params, weighted_norm
from .ode import OdeTrajectory, OmegaPath
from .quadrature import suffix_trapezoid, trapezoid_weights

CLAMP_TOL = 1e-10
NOISE_FRACTION = 1e-6
ROOT_TOL = 1e-12
PICARD_TOL = 1e-12
PICARD_MIN_NODES = 64


@dataclass(frozen=True, eq=False)
class VField:
    """Samples of v(t, x) = int_x^inf (xi - x) u(xi) dxi."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    frame: str = ORIGINAL

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def v_transform(u: Density, t: float = 0.0) -> VField:
    """v_i = P_i - x_i U_i with suffix trapezoid moments of u from node i.

    The second centred difference of the result gives back u exactly at
    interior nodes, so :func:`recover_u` is its discrete inverse.
    """
    x = u.grid.nodes
    dx = u.grid.dx
    tail_mass = suffix_trapezoid(u.values, dx)
    tail_first = suffix_trapezoid(x * u.values, dx)
    v = tail_first - x * tail_mass
    v[-1] = 0.0
    return VField(u.grid, v, t, u.frame)


def recover_u(v: VField) -> Density:
    """Second difference of v; one-sided four-point stencils at the ends."""
    vals = v.values
    n = vals.size
    if n < 4:
        raise ValueError("recover_u needs at least 4 nodes")
    dx2 = v.grid.dx ** 2
    u = np.empty(n)
    u[1:-1] = (vals[:-2] - 2.0 * vals[1:-1] + vals[2:]) / dx2
    u[0] = (2.0 * vals[0] - 5.0 * vals[1] + 4.0 * vals[2] - vals[3]) / dx2
    u[-1] = (2.0 * vals[-1] - 5.0 * vals[-2] + 4.0 * vals[-3] - vals[-4]) / dx2
    w = v.grid.weights
    neg = u < 0
    negative_mass = float(w[neg] @ -u[neg])
    total = float(w @ np.abs(u))
    if negative_mass > NOISE_FRACTION * max(total, np.finfo(float).tiny):
        raise NoiseDominated(f"negative mass {negative_mass:.3e} exceeds {NOISE_FRACTION:g} of total {total:.3e}")
    u[neg] = 0.0
    return Density(v.grid, u, v.frame)


# --------------------------------------------------------------------------- characteristic feet


def _rho(w: OmegaPath, t: float, x, s: float):
    """Vectorised foot times for 0 <= x <= int_s^t omega (no region check)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Ct = float(w.C(t))
    lo = np.full_like(x, s)
    hi = np.full_like(x, t)
    rho = np.clip(t - x / float(w(t)), s, t)
    tol = ROOT_TOL * np.maximum(1.0, x)
    for _ in range(200):
        f = Ct - w.C(rho) - x
        done = np.abs(f) < tol
        if done.all():
            break
        # f is decreasing in rho: f > 0 means the root lies to the right
        lo = np.where(f > 0, rho, lo)
        hi = np.where(f < 0, rho, hi)
        step = rho + f / w(rho)
        bad = (step <= lo) | (step >= hi) | ~np.isfinite(step)
        new = np.where(bad, 0.5 * (lo + hi), step)
        rho = np.where(done, rho, new)
    return rho


def rho_inverse(w: OmegaPath, s: float, t: float, x: float) -> float:
    """Time rho in [s, t] with x = int_rho^t omega.

    Points on the front x = int_s^t omega (to root tolerance) map to rho = s;
    points beyond it raise :class:`OutOfBoundaryRegion`.
    """
    if not s <= t:
        raise ValueError("need s <= t")
    if x < 0:
        raise ValueError("x must be nonnegative")
    reach = float(w.integral(s, t))
    tol = ROOT_TOL * max(1.0, x)
    if x > reach + tol:
        raise OutOfBoundaryRegion(f"x={x} lies beyond the boundary front {reach}")
    if x == 0:
        return float(t)
    if x >= reach - tol:
        # the characteristic through the corner (s, 0)
        return float(s)
    return float(_rho(w, t, x, s)[0])


class CharacteristicTrace(NamedTuple):
    t: float
    x: float
    branch: str  # "initial" or "boundary"
    foot_time: float
    foot_x: float
    decay: float


def trace_characteristic(w: OmegaPath, s: float, t: float, x: float,
                         mu0: float, beta: float) -> CharacteristicTrace:
    """Follow the characteristic through (t, x) (shifted frame) back to its foot.

    The decay exponent int (mu0 + beta X(r)) dr is evaluated from the exact
    antiderivatives of the cubic omega pieces.
    """
    reach = float(w.integral(s, t))
    if x >= reach:
        y = x - reach
        decay = mu0 * (t - s) + beta * (t - s) * y + beta * float(w.lag_integral(s, t))
        return CharacteristicTrace(t, x, "initial", float(s), float(y), float(decay))
    rho = rho_inverse(w, s, t, x)
    decay = mu0 * (t - rho) + beta * float(w.lag_integral(rho, t))
    return CharacteristicTrace(t, x, "boundary", rho, 0.0, float(decay))


def decay_exponent_gauss(w: OmegaPath, foot_time: float, foot_x: float, t: float,
                         mu0: float, beta: float, n_nodes: int = 16) -> float:
    """Same exponent as :func:`trace_characteristic` by Gauss-Legendre quadrature.

    X(r) = foot_x + int_{foot_time}^r omega is itself integrated with a nested
    rule, so this is an independent cross-check of the closed form.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * (t - foot_time)
    r = foot_time + half * (nodes + 1.0)
    X = np.empty_like(r)
    for i, ri in enumerate(r):
        h = 0.5 * (ri - foot_time)
        q = foot_time + h * (nodes + 1.0)
        X[i] = foot_x + h * float(weights @ w(q))
    return float(half * (weights @ (mu0 + beta * X)))


# --------------------------------------------------------------------------- evolution operators


def _sample(values, grid: Grid, y, interpolation: str):
    """Evaluate grid samples at points y, zero outside [x_left, x_max].

    Feet within 1e-9 cells of an end count as inside, so that a shift of
    exactly one cell is not lost to rounding in int omega.
    """
    slack = 1e-9 * grid.dx
    inside = (y >= grid.x_left - slack) & (y <= grid.x_max + slack)
    out = np.zeros_like(y)
    if not inside.any():
        return out
    y = np.clip(y, grid.x_left, grid.x_max)
    if interpolation == "linear":
        out[inside] = np.interp(y[inside], grid.nodes, values)
    elif interpolation == "pchip":
        # scipy's slope formula divides by zero on flat stretches; those slopes are set to 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out[inside] = PchipInterpolator(grid.nodes, values, extrapolate=False)(y[inside])
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    return out


def U0_apply(w: OmegaPath, s: float, t: float, g: Density, mu0: float, beta: float,
             interpolation: str = "pchip") -> Density:
    """Transport-and-decay evolution of g from time s to t with zero inflow.

    [U0(t,s) g](x) = g(x - K) exp(-phi),  K = int_s^t omega,
    phi = mu0 (t-s) + beta (t-s)(x - K) + beta int_s^t (t-r) omega(r) dr.
    """
    if g.frame != SHIFTED:
        raise ValueError("U0_apply works in the shifted frame")
    if t == s:
        return g
    K = float(w.integral(s, t))
    dt = t - s
    y = g.grid.nodes - K
    phi = mu0 * dt + beta * dt * y + beta * float(w.lag_integral(s, t))
    vals = _sample(g.values, g.grid, y, interpolation)
    keep = vals != 0
    vals[keep] *= np.exp(-phi[keep])
    return g.with_values(vals)


def V0_apply(w: OmegaPath, s: float, t: float, h: Callable, grid: Grid, mu0: float,
             beta: float) -> Density:
    """Part of the solution fed by boundary data h at s = 0 (shifted frame).

    For x < int_s^t omega the value is h(rho) exp(-[mu0 (t-rho) + beta int_rho^t (t-r) omega dr]),
    with rho the foot of the characteristic; zero elsewhere.
    """
    if grid.x_left != 0.0:
        raise ValueError("V0_apply needs a shifted-frame grid starting at 0")
    x = grid.nodes
    out = np.zeros_like(x)
    if t == s:
        return Density(grid, out, SHIFTED)
    reach = float(w.integral(s, t))
    mask = x < reach
    if mask.any():
        rho = _rho(w, t, x[mask], s)
        decay = mu0 * (t - rho) + beta * w.lag_integral(rho, t)
        out[mask] = np.asarray(h(rho), dtype=float) * np.exp(-decay)
    return Density(grid, out, SHIFTED)


def V0_norm_bound(sup_h: float, omega_max: float, span: float, mu0: float, a: float) -> float:
    """sup|h| * omega_max * int_0^span (a + omega_max sigma) exp(-mu0 sigma) dsigma."""
    e = np.exp(-mu0 * span)
    first = a * (1.0 - e) / mu0
    second = omega_max * (1.0 - e * (1.0 + mu0 * span)) / mu0 ** 2
    return sup_h * omega_max * (first + second)


# --------------------------------------------------------------------------- boundary data


def moment_boundary(w: OmegaPath, m0: float, m1: float, mu0: float, beta: float,
                    t0: float | None = None) -> Callable:
    """Boundary data h(t) = int s u(t, s) ds for the linear problem with speed w.

    The zeroth and first moments in the shifted frame obey
    m0' = -mu0 m0 + beta m1,  m1' = omega(t) m0 - mu0 m1,
    which is solved with dense output. Returns a vectorised callable.
    """
    t0 = w.t0 if t0 is None else t0

    def rhs(t, z):
        return (-mu0 * z[0] + beta * z[1], float(w(t)) * z[0] - mu0 * z[1])

    sol = solve_ivp(rhs, (t0, w.t_end), (m0, m1), method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    dense = sol.sol

    def h(t):
        t = np.asarray(t, dtype=float)
        return dense(np.clip(t, t0, w.t_end))[1]

    return h


def boundary_from_trajectory(traj: OdeTrajectory) -> Callable:
    """h(t) = P(t) - x0 U(t) from the Hermite interpolant of an ODE run."""
    interp = traj.interpolant()
    x0 = traj.params.x0

    def h(t):
        s = interp(np.asarray(t, dtype=float))
        return s[..., 2] - x0 * s[..., 0]

    return h


def solve_v_characteristics(p: Params, w: OmegaPath, u0: Density, boundary: Callable,
                            times, s: float | None = None) -> list:
    """v(t, .) at each requested time from initial density u0 at time s.

    Points beyond the boundary front carry the transported initial v; points
    behind it carry boundary(rho) with the exact decay along the characteristic.
    """
    if u0.frame != ORIGINAL:
        raise ValueError("solve_v_characteristics expects an original-frame initial density")
    s = w.t0 if s is None else s
    v0 = v_transform(u0.to_shifted(p.x0), s)
    v0_density = Density(v0.grid, v0.values, SHIFTED)
    out = []
    for t in times:
        t = float(t)
        if t < s:
            raise ValueError("requested time precedes the initial time")
        init_part = U0_apply(w, s, t, v0_density, p.mu0, p.beta)
        bnd_part = V0_apply(w, s, t, boundary, v0.grid, p.mu0, p.beta)
        vals = init_part.values + bnd_part.values
        out.append(VField(u0.grid, vals, t, ORIGINAL))
    return out


# --------------------------------------------------------------------------- Picard construction


def gain(u: np.ndarray, dx: float, beta: float) -> np.ndarray:
    """B u = 2 beta int_x^inf u, by suffix trapezoid."""
    return 2.0 * beta * suffix_trapezoid(u, dx)


@dataclass(eq=False)
class PicardResult:
    times: np.ndarray
    path: list  # final iterate at every time node, shifted-frame Densities
    iterates: list  # successive iterates at the final time
    increments: list  # weighted norm of u_{n+1}(t) - u_n(t)
    max_norm: float
    bound: float
    converged: bool

    @property
    def final(self) -> Density:
        return self.iterates[-1]


def _picard_setup(w, s, g, t, n_time):
    if g.frame != SHIFTED:
        raise ValueError("Picard iteration works in the shifted frame")
    if np.any(g.values < 0):
        raise ValueError("initial density must be nonnegative")
    n_time = max(int(n_time), PICARD_MIN_NODES)
    return np.linspace(s, t, n_time)


def _cut_weights(w: OmegaPath, times, j, grid: Grid):
    """Per-node trapezoid weights for int_{times[0]}^{times[j]} F(r) dr, F(r) = [U0(t_j, r) f(r)](x).

    For x behind the boundary front F vanishes for r < rho(t_j, x), so the
    rule runs over [rho, t_j] only: the cut cell [rho, r_k*] is a trapezoid
    whose left value is the boundary sample of f at rho. Returns the weight
    matrix for the node values, the cut times, the cut-cell weight (applied
    to F(rho)), and the linear time-interpolation data (k*, theta) for f(rho).
    """
    r = times[: j + 1]
    h = times[1] - times[0]
    s, t = times[0], times[j]
    x = grid.nodes
    W = np.tile(trapezoid_weights(j + 1, h)[:, None], (1, x.size))
    reach = float(w.integral(s, t))
    behind = x < reach
    rho = np.full(x.size, s)
    kstar = np.zeros(x.size, dtype=int)
    cut_w = np.zeros(x.size)
    theta = np.zeros(x.size)
    if behind.any():
        rho_b = _rho(w, t, x[behind], s)
        k = np.clip(np.ceil((rho_b - s) / h - 1e-9).astype(int), 1, j)
        # snap feet that land on a node to that node
        on_node = np.abs(rho_b - r[k - 1]) <= 1e-9 * h
        k = np.where(on_node, k - 1, k)
        rho_b = np.where(on_node, r[k], rho_b)
        kb = np.arange(j + 1)[:, None]
        Wb = np.where(kb > k[None, :], h, 0.0)
        Wb[j, :] = np.where(k < j, 0.5 * h, 0.0)
        gap = r[k] - rho_b
        Wb[k, np.arange(k.size)] += 0.5 * gap + np.where(k < j, 0.5 * h, 0.0)
        W[:, behind] = Wb
        rho[behind] = rho_b
        kstar[behind] = k
        cut_w[behind] = 0.5 * gap
        theta[behind] = np.where(k > 0, gap / h, 0.0)
    return W, rho, cut_w, kstar, theta


def _boundary_sample(stack, kstar, theta):
    """f(rho)(0) by linear interpolation in time between nodes k*-1 and k*."""
    left = stack[np.maximum(kstar - 1, 0), 0]
    return theta * left + (1.0 - theta) * stack[kstar, 0]


def _U0_linear_sum(w: OmegaPath, sources, t, stack, W, grid: Grid, mu0, beta):
    """sum_k W[k, x] * [U0(t, sources[k]) stack[k]](x), linear interpolation.

    Batched form of ``U0_apply(..., interpolation="linear")`` over many
    source times at once, with per-node weights.
    """
    sources = np.asarray(sources, dtype=float)
    x = grid.nodes
    n = grid.n
    K = float(w.C(t)) - w.C(sources)
    span = t - sources
    lag = w.lag_integral(sources, np.full_like(sources, t))
    y = x[None, :] - K[:, None]
    pos = (y - grid.x_left) / grid.dx
    valid = (pos >= -1e-9) & (pos <= n + 1e-9)
    pos = np.clip(pos, 0, n)
    i0 = np.clip(np.floor(pos).astype(int), 0, n - 1)
    frac = pos - i0
    rows = np.arange(len(sources))[:, None]
    vals = (1.0 - frac) * stack[rows, i0] + frac * stack[rows, i0 + 1]
    phi = mu0 * span[:, None] + beta * span[:, None] * y + beta * lag[:, None]
    vals = np.where(valid, vals * np.exp(-np.where(valid, phi, 0.0)), 0.0)
    return np.einsum("kx,kx->x", W, vals)


def _gain_integral(w, times, j, Bu, grid, mu0, beta):
    """Quadrature of int_{times[0]}^{times[j]} U0(t_j, r) Bu(r) dr on the grid."""
    if j == 0:
        return np.zeros(grid.n + 1)
    t = times[j]
    W, rho, cut_w, kstar, theta = _cut_weights(w, times, j, grid)
    acc = _U0_linear_sum(w, times[: j + 1], t, Bu[: j + 1], W, grid, mu0, beta)
    cut = cut_w > 0
    if cut.any():
        decay = mu0 * (t - rho[cut]) + beta * w.lag_integral(rho[cut], np.full(cut.sum(), t))
        acc[cut] += cut_w[cut] * _boundary_sample(Bu, kstar[cut], theta[cut]) * np.exp(-decay)
    return acc


def picard_solve(w: OmegaPath, s: float, g: Density, t: float, mu0: float, beta: float,
                 n_iter: int = 30, n_time: int = PICARD_MIN_NODES, a: float | None = None,
                 tol: float = PICARD_TOL) -> PicardResult:
    """Iterate u_{n+1}(r) = U0(r,s) g + int_s^r U0(r,q) B u_n(q) dq from u_0 = 0.

    The time integral is the composite trapezoid rule on ``n_time`` uniform
    nodes, cut at the time where the backward characteristic leaves the
    boundary (the integrand jumps there). U0 uses linear interpolation so
    every iteration map is a positive linear operator and the iterates
    increase exactly.
    """
    times = _picard_setup(w, s, g, t, n_time)
    a = mu0 / beta if a is None else a
    grid, dx = g.grid, g.grid.dx
    m = times.size

    free = np.array([U0_apply(w, s, r, g, mu0, beta, "linear").values for r in times])
    current = np.zeros_like(free)
    iterates, increments = [], []
    bound = 10.0 * (weighted_norm(g, a) + 1.0)
    max_norm = 0.0
    converged = False
    for _ in range(n_iter):
        Bu = 2.0 * beta * np.array([suffix_trapezoid(c, dx) for c in current])
        new = free.copy()
        for j in range(1, m):
            new[j] += _gain_integral(w, times, j, Bu, grid, mu0, beta)
        inc = weighted_norm(g.with_values(new[-1] - current[-1]), a)
        current = new
        iterates.append(g.with_values(current[-1]))
        increments.append(inc)
        max_norm = max(max_norm, max(weighted_norm(g.with_values(c), a) for c in current))
        if inc < tol * max(1.0, weighted_norm(iterates[-1], a)):
            converged = True
            break
    path = [g.with_values(c) for c in current]
    return PicardResult(times, path, iterates, increments, max_norm, bound, converged)


def picard_iterate(w: OmegaPath, s: float, g: Density, t: float, n_iter: int,
                   mu0: float, beta: float, n_time: int = PICARD_MIN_NODES) -> list:
    """The Picard iterates u_1, u_2, ... evaluated at time t."""
    return picard_solve(w, s, g, t, mu0, beta, n_iter=n_iter, n_time=n_time).iterates


def mild_residual(w: OmegaPath, s: float, g: Density, result: PicardResult, mu0: float,
                  beta: float, a: float | None = None) -> float:
    """Relative weighted norm of u - U0 g - int U0 B u at the final time.

    Node terms go through :func:`U0_apply` one source time at a time rather
    than the batched sum used inside :func:`picard_solve`.
    """
    a = mu0 / beta if a is None else a
    times = result.times
    j = times.size - 1
    t = times[j]
    dx = g.grid.dx
    Bu = np.array([gain(c.values, dx, beta) for c in result.path])
    W, rho, cut_w, kstar, theta = _cut_weights(w, times, j, g.grid)
    acc = U0_apply(w, s, t, g, mu0, beta, "linear").values.copy()
    for k, r in enumerate(times):
        acc += W[k] * U0_apply(w, r, t, g.with_values(Bu[k]), mu0, beta, "linear").values
    decay = mu0 * (t - rho) + beta * w.lag_integral(rho, np.full_like(rho, t))
    acc += cut_w * _boundary_sample(Bu, kstar, theta) * np.exp(-decay)
    resid = weighted_norm(g.with_values(result.path[-1].values - acc), a)
    return resid / max(weighted_norm(result.path[-1], a), np.finfo(float).tiny)


def derivative_norm(u: Density, a: float) -> float:
    """Weighted norm of the finite-difference derivative of u (diagnostic only)."""
    return weighted_norm(u.with_values(np.gradient(u.values, u.grid.dx)), a)
