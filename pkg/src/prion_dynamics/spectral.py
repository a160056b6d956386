"""Constant-speed operator calculus in the shifted frame.

With omega fixed, the linearised density equation is u' = -L u where
L = A - B, A u = omega u' + (mu0 + beta x) u (with u(0) = 0) and
B u = 2 beta int_x^inf u. In the disease case beta*omega = mu0^2 the
kernel of L is spanned by e(x) = (beta/mu0)^2 Phi(beta x / mu0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .characteristics import U0_apply
from .errors import NotDiseaseCase
from .model import (DISEASE, SHIFTED, Density, Grid, Params, derive_constants, phi, phi_prime,
                    phi_second)
from .ode import OmegaPath
from .quadrature import suffix_trapezoid, trapezoid

DISEASE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OperatorContext:
    omega: float
    mu0: float
    beta: float
    a: float
    grid: Grid

    def __post_init__(self):
        for name in ("omega", "mu0", "beta", "a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid.x_left != 0.0:
            raise ValueError("operator context needs a shifted-frame grid starting at 0")

    @classmethod
    def from_params(cls, p: Params, regime: str = DISEASE, n: int = 2000, span: float | None = None,
                    a: float | None = None):
        dc = derive_constants(p, regime, a)
        if span is None:
            span = 25.0 * p.mu0 / p.beta
        return cls(dc.omega_inf, dc.mu0, p.beta, dc.a, Grid(0.0, span, n))

    @property
    def is_disease(self) -> bool:
        return abs(self.beta * self.omega - self.mu0 ** 2) < DISEASE_TOL * max(1.0, self.mu0 ** 2)

    @property
    def x(self):
        return self.grid.nodes

    def density(self, values) -> Density:
        return Density(self.grid, values, SHIFTED)

    def norm(self, u: Density) -> float:
        """a|u|_1 + |x u|_1 with the end-corrected trapezoid rule."""
        return trapezoid((self.a + self.x) * np.abs(u.values), self.grid.dx, corrected=True)

    def functional(self, u: Density) -> float:
        """int (a + x) u, the functional that the projection is built from."""
        return trapezoid((self.a + self.x) * u.values, self.grid.dx, corrected=True)


def _shifted(ctx, u):
    if u.frame != SHIFTED or u.grid != ctx.grid:
        raise ValueError("density must live on the context grid in the shifted frame")
    return u.values


def gain(ctx: OperatorContext, u: Density, du: Density | None = None) -> np.ndarray:
    """2 beta int_x^inf u; end-corrected when the derivative is supplied."""
    dvals = None if du is None else _shifted(ctx, du)
    return 2.0 * ctx.beta * suffix_trapezoid(_shifted(ctx, u), ctx.grid.dx, dvals)


def apply_L(ctx: OperatorContext, u: Density, du: Density) -> Density:
    vals = _shifted(ctx, u)
    out = ctx.omega * _shifted(ctx, du) + (ctx.mu0 + ctx.beta * ctx.x) * vals - gain(ctx, u, du)
    return ctx.density(out)


def resolvent_A(ctx: OperatorContext, lam: float, f: Density) -> Density:
    """(lam + A)^{-1} f with zero inflow at x = 0.

    The solution u(x) = (1/omega) int_0^x exp(Theta(y) - Theta(x)) f(y) dy,
    Theta(x) = (lam + mu0) x / omega + beta x^2 / (2 omega), is built by the
    trapezoid rule one cell at a time. Each step multiplies the running value
    by exp(Theta(x_i) - Theta(x_{i+1})) <= 1, so only exponent differences
    are ever exponentiated and the cost is O(n).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    fv = _shifted(ctx, f)
    x, dx, om = ctx.x, ctx.grid.dx, ctx.omega
    theta = (lam + ctx.mu0) * x / om + ctx.beta * x * x / (2.0 * om)
    E = np.exp(-np.diff(theta))
    half = (dx / (2.0 * om)) * fv
    u = np.zeros_like(fv)
    prev = 0.0
    for i in range(E.size):
        prev = E[i] * (prev + half[i]) + half[i + 1]
        u[i + 1] = prev
    return ctx.density(u)


def resolvent_A_direct(ctx: OperatorContext, lam: float, f: Density) -> Density:
    """O(n^2) reference: per-node trapezoid of the closed-form integral."""
    fv = _shifted(ctx, f)
    x, dx, om = ctx.x, ctx.grid.dx, ctx.omega
    theta = (lam + ctx.mu0) * x / om + ctx.beta * x * x / (2.0 * om)
    out = np.zeros_like(fv)
    for i in range(1, x.size):
        integrand = np.exp(theta[: i + 1] - theta[i]) * fv[: i + 1]
        out[i] = trapezoid(integrand, dx) / om
    return ctx.density(out)


# --------------------------------------------------------------------------- kernel and projection


@dataclass(frozen=True, eq=False)
class KernelElement:
    grid: Grid
    values: np.ndarray
    derivative: np.ndarray
    normalization: float  # quadrature value of int (a + x) e dx

    @property
    def density(self) -> Density:
        return Density(self.grid, self.values, SHIFTED)

    @property
    def derivative_density(self) -> Density:
        return Density(self.grid, self.derivative, SHIFTED)


def _require_disease(ctx):
    if not ctx.is_disease:
        raise NotDiseaseCase(f"beta*omega = {ctx.beta * ctx.omega!r} differs from mu0^2 = {ctx.mu0 ** 2!r}")


def kernel_e(ctx: OperatorContext) -> KernelElement:
    _require_disease(ctx)
    k = ctx.beta / ctx.mu0
    z = k * ctx.x
    values = k * k * phi(z)
    deriv = k ** 3 * phi_prime(z)
    values[0] = 0.0
    norm = trapezoid((ctx.a + ctx.x) * values, ctx.grid.dx, corrected=True)
    return KernelElement(ctx.grid, values, deriv, norm)


def kernel_ode_residual(z):
    """v'' + (1 + z) v' + 3 v for v = Phi, from the analytic derivatives."""
    z = np.asarray(z, dtype=float)
    return phi_second(z) + (1.0 + z) * phi_prime(z) + 3.0 * phi(z)


def ergodic_projection(ctx: OperatorContext, u: Density, kernel: KernelElement | None = None) -> Density:
    """Rank-one projection onto span{e} along the zero set of int (a + x) u.

    The coefficient is divided by the quadrature value of int (a + x) e so
    that the discrete map is exactly idempotent; that value is 1 up to the
    quadrature error.
    """
    _require_disease(ctx)
    kernel = kernel_e(ctx) if kernel is None else kernel
    coef = ctx.functional(u) / kernel.normalization
    return ctx.density(coef * kernel.values)


def accretivity_bracket(ctx: OperatorContext, u: Density, du: Density) -> float:
    """int (L u) sgn(u) (a + x) dx with sgn(0) = 0."""
    Lu = apply_L(ctx, u, du).values
    sgn = np.sign(_shifted(ctx, u))
    return trapezoid(Lu * sgn * (ctx.a + ctx.x), ctx.grid.dx, corrected=True)


def accretivity_lower_bound(ctx: OperatorContext, u: Density) -> float:
    """(mu0 a - omega)|u|_1 + (mu0 - beta a)|x u|_1."""
    v = np.abs(_shifted(ctx, u))
    dx = ctx.grid.dx
    l1 = trapezoid(v, dx, corrected=True)
    xl1 = trapezoid(ctx.x * v, dx, corrected=True)
    return (ctx.mu0 * ctx.a - ctx.omega) * l1 + (ctx.mu0 - ctx.beta * ctx.a) * xl1


# --------------------------------------------------------------------------- semigroup


def _solve_implicit_gain(r: np.ndarray, c: float, dx: float, c1: float | None = None) -> np.ndarray:
    """Solve u_i - c * S_i(u) = r_i for i >= 1 with u_0 = 0, S the suffix trapezoid sum.

    Eliminating the suffix sums leaves the scalar backward recursion
    u_i = ((1 + q) u_{i+1} + r_i - r_{i+1}) / (1 - q), q = c dx / 2, u_n = r_n.
    ``c1`` replaces c in the equation for node 1.
    """
    q = 0.5 * c * dx
    if not q < 1:
        raise ValueError("implicit gain step too large")
    rr = r[::-1]
    forcing = np.empty_like(rr)
    forcing[0] = rr[0] * (1.0 - q)
    forcing[1:] = rr[1:] - rr[:-1]
    out = lfilter([1.0 / (1.0 - q)], [1.0, -(1.0 + q) / (1.0 - q)], forcing)[::-1]
    if c1 is not None and out.size > 2:
        tail = float(suffix_trapezoid(out[2:], dx)[0])
        out[1] = (r[1] + c1 * (tail + 0.5 * dx * out[2])) / (1.0 - 0.5 * c1 * dx)
    out[0] = 0.0
    return out


def _end_correction(u, dx):
    """Euler-Maclaurin term turning the suffix trapezoid sum into an O(dx^4) rule."""
    d = np.gradient(u, dx, edge_order=2)
    return -dx * dx / 12.0 * (d[-1] - d)


def _gain_em(ctx, u):
    dx = ctx.grid.dx
    S = suffix_trapezoid(u, dx) + _end_correction(u, dx)
    return 2.0 * ctx.beta * np.maximum(S, 0.0)


def _implicit_em(ctx, r, weight, weight1=None, sweeps=2):
    """Solve u = r + weight * B u (node 1: weight1) with the end-corrected gain.

    The plain-trapezoid system is solved exactly; the small end correction is
    folded in by a few fixed-point sweeps.
    """
    dx = ctx.grid.dx
    c = 2.0 * ctx.beta * weight
    c1 = None if weight1 is None else 2.0 * ctx.beta * weight1
    u = _solve_implicit_gain(r, c, dx, c1)
    for _ in range(sweeps):
        corr = _end_correction(u, dx)
        rhs = r + c * corr
        if c1 is not None:
            rhs[1] = r[1] + c1 * corr[1]
        u = _solve_implicit_gain(rhs, c, dx, c1)
    return u


def _U0(ctx, path, s, t, values, interpolation="linear"):
    return np.array(U0_apply(path, s, t, ctx.density(values), ctx.mu0, ctx.beta, interpolation).values)


def _trapezoid_step(ctx, path, u, t_from, t_to, interpolation):
    """u(t_to) = U0 [u + (h/2) B u] + (h/2) B u(t_to)."""
    h = t_to - t_from
    moved = _U0(ctx, path, t_from, t_to, u + 0.5 * h * _gain_em(ctx, u), interpolation)
    return _implicit_em(ctx, moved, 0.5 * h)


def _simpson_step(ctx, path, u, t_from, h):
    """Two aligned steps with Simpson's rule for the gain integral.

    u(t+2h) = U0(2h)[u + (h/3) B u] + (4h/3) U0(h) B u(t+h) + (h/3) B u(t+2h),
    the midpoint value coming from one trapezoid step. At node 1 the
    integrand vanishes until the characteristic leaves the boundary at t+h,
    so that node uses the trapezoid rule on the second half only.
    """
    mid = _trapezoid_step(ctx, path, u, t_from, t_from + h, "linear")
    B_mid = _gain_em(ctx, mid)
    r = _U0(ctx, path, t_from, t_from + 2 * h, u + (h / 3.0) * _gain_em(ctx, u))
    moved_mid = _U0(ctx, path, t_from + h, t_from + 2 * h, B_mid)
    r += (4.0 * h / 3.0) * moved_mid
    r[1] = 0.5 * h * moved_mid[1]
    return _implicit_em(ctx, r, h / 3.0, weight1=0.5 * h)


def semigroup_step(ctx: OperatorContext, u0: Density, t: float) -> Density:
    """T(t) u0 = exp(-L t) u0 along characteristics.

    Steps of length dx/omega move the profile exactly one cell, so the
    transport needs no interpolation. The gain integral uses Simpson's rule
    over pairs of steps and end-corrected suffix sums in x; a leftover single
    step uses the trapezoid rule and a final shorter step uses monotone cubic
    interpolation. All weights are positive, so u0 >= 0 gives T(t) u0 >= 0.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    u = np.array(_shifted(ctx, u0), dtype=float)
    if t == 0:
        return ctx.density(u)
    positive = bool(np.all(u >= 0))
    h = ctx.grid.dx / ctx.omega
    n_full = int(math.floor(t / h + 1e-9))
    path = OmegaPath.constant(ctx.omega, t + 2 * h)
    u[0] = 0.0
    clock = 0.0
    for _ in range(n_full // 2):
        u = _simpson_step(ctx, path, u, clock, h)
        clock += 2 * h
        if positive:
            np.maximum(u, 0.0, out=u)
    if n_full % 2:
        u = _trapezoid_step(ctx, path, u, clock, clock + h, "linear")
        clock += h
    rest = t - clock
    if rest > 1e-12 * h:
        u = _trapezoid_step(ctx, path, u, clock, t, "pchip")
    if positive:
        np.maximum(u, 0.0, out=u)
    return ctx.density(u)


def growth_bound(ctx: OperatorContext) -> float:
    """-mu0 + sqrt(beta omega): exponential type of T(t) in the disease-free case."""
    return -ctx.mu0 + math.sqrt(ctx.beta * ctx.omega)


def resolvent_L_iterates(ctx: OperatorContext, lam: float, f: Density, n_iter: int = 200,
                         tol: float = 1e-13) -> list:
    """u_1 = (lam + A)^{-1} f, u_{n+1} = u_1 + (lam + A)^{-1} B u_n.

    For f >= 0 the sequence increases to the solution of (lam + L) u = f.
    """
    first = resolvent_A(ctx, lam, f)
    out = [first]
    for _ in range(n_iter - 1):
        Bu = ctx.density(gain(ctx, out[-1]))
        nxt = first + resolvent_A(ctx, lam, Bu)
        out.append(nxt)
        if ctx.norm(nxt - out[-2]) < tol * max(1.0, ctx.norm(nxt)):
            break
    return out


def complement_decay_modulus(ctx: OperatorContext, t: float = 1.0, n_iter: int = 40,
                             seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius of T(t) off span{e}.

    Logged as a diagnostic only; the truncated grid perturbs the spectrum.
    """
    _require_disease(ctx)
    kernel = kernel_e(ctx)
    rng = np.random.default_rng(seed)
    x = ctx.x
    v = ctx.density(x * np.exp(-x) * (1.0 + 0.1 * rng.standard_normal(x.size)))
    v = v - ergodic_projection(ctx, v, kernel)
    ratio = 0.0
    for _ in range(n_iter):
        nv = ctx.norm(v)
        if nv == 0:
            return 0.0
        v = v * (1.0 / nv)
        w = semigroup_step(ctx, v, t)
        w = w - ergodic_projection(ctx, w, kernel)
        ratio = ctx.norm(w)
        v = w
    return float(ratio)
