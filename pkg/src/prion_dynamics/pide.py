"""Direct time marching of the coupled monomer / polymer-density system.

Each step of :func:`integrate_pide` is

1. one RK4 step for V with U, P frozen at the current density,
2. first-order upwind transport at speed tau*V with zero inflow at x0,
3. decay exp(-(mu + beta*x) dt) with the fragmentation gain
   2*beta * int_x^inf u integrated by an exponential Heun rule, which keeps
   the density nonnegative and the step second order in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, NegativeDensity
from .model import (ORIGINAL, Density, Grid, Params, Threshold, disease_equilibrium_ode,
                    threshold_classify, weighted_norm)
from .quadrature import suffix_trapezoid

NEG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PideState:
    t: float
    V: float
    u: Density


@dataclass(eq=False)
class PideRun:
    params: Params
    grid: Grid
    dt: float
    states: list = field(default_factory=list)
    # per-step moment history: columns t, U, V, P
    history: np.ndarray | None = None
    frozen_V: bool = False
    a: float | None = None

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> PideState:
        return self.states[-1]

    def diagnostics(self):
        a = self.params.mu0 / self.params.beta if self.a is None else self.a
        U, P = np.array([moments(s.u) for s in self.states]).T
        out = {
            "t": self.times,
            "norm": np.array([weighted_norm(s.u, a) for s in self.states]),
            "U": U,
            "P": P,
            "V": np.array([s.V for s in self.states]),
        }
        resid = np.full(len(self.states), np.nan)
        if len(self.states) >= 3:
            resid[1:-1] = mass_balance_residual(self)
        out["mass_residual"] = resid
        return out


def fragmentation_gain(u: Density, beta: float) -> Density:
    """2*beta times the suffix trapezoid integral of u (zero at x_max)."""
    if u.frame != ORIGINAL:
        raise ValueError("fragmentation_gain expects an original-frame density")
    return u.with_values(2.0 * beta * suffix_trapezoid(u.values, u.grid.dx))


def moments(u: Density):
    """Trapezoid values of (int u, int x u) in the original frame."""
    if u.frame != ORIGINAL:
        raise ValueError("moments expects an original-frame density")
    w = u.grid.weights
    return float(w @ u.values), float((w * u.grid.nodes) @ u.values)


def default_dt(p: Params, grid: Grid, V0: float) -> float:
    # the monomer target (lam + beta x0^2 U) / (gamma + tau U) is a mediant,
    # so V never exceeds its start or the larger of the two ratios
    V_bound = max(V0, p.lam / p.gamma, p.beta * p.x0 ** 2 / p.tau)
    if threshold_classify(p) is Threshold.SUPERCRITICAL:
        V_bound = max(V_bound, disease_equilibrium_ode(p).V)
    return 0.5 * grid.dx / (p.tau * (V_bound + 1.0))


def _rk4_monomer(V, U, dt, p):
    # dV/dt = lam - (gamma + tau U) V + beta x0^2 U, linear in V for frozen U
    k = p.gamma + p.tau * U
    src = p.lam + p.beta * p.x0 ** 2 * U

    def f(v):
        return src - k * v

    k1 = f(V)
    k2 = f(V + 0.5 * dt * k1)
    k3 = f(V + 0.5 * dt * k2)
    k4 = f(V + dt * k3)
    return V + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_pide(p: Params, init: PideState, t_end: float, grid: Grid | None = None,
                   dt: float | None = None, snapshot_every: float | None = None,
                   freeze_V: bool = False, a: float | None = None) -> PideRun:
    """March the coupled system from ``init`` to ``t_end``.

    ``dt`` is reduced so that a whole number of steps reaches ``t_end``.
    ``freeze_V`` holds V at its initial value, which turns the density
    equation into the linear constant-speed problem.
    """
    grid = init.u.grid if grid is None else grid
    if init.u.grid != grid or init.u.frame != ORIGINAL:
        raise ValueError("initial density must be on the run grid in the original frame")
    if abs(grid.x_left - p.x0) > 1e-12 * max(1.0, p.x0):
        raise ValueError("grid must start at x0")
    if np.any(init.u.values < 0) or init.V < 0:
        raise NegativeDensity("initial data must be nonnegative")
    span = t_end - init.t
    if not span > 0:
        raise ValueError("t_end must be after the initial time")
    if dt is None:
        dt = default_dt(p, grid, init.V)
    n_steps = max(1, math.ceil(span / dt - 1e-9))
    dt = span / n_steps
    if snapshot_every is None:
        snap_stride = n_steps
    else:
        snap_stride = max(1, int(round(snapshot_every / dt)))

    x = grid.nodes
    dx = grid.dx
    w = grid.weights
    wx = w * x
    decay = np.exp(-(p.mu + p.beta * x) * dt)
    two_beta_dt = 2.0 * p.beta * dt

    u = np.array(init.u.values, dtype=float)
    u[0] = 0.0
    u[-1] = 0.0
    V = float(init.V)
    t0 = init.t

    run = PideRun(p, grid, dt, frozen_V=freeze_V, a=a)
    run.states.append(PideState(t0, V, Density(grid, u, ORIGINAL)))
    hist = np.empty((n_steps + 1, 4))
    U, P = float(w @ u), float(wx @ u)
    hist[0] = (t0, U, V, P)

    for k in range(1, n_steps + 1):
        if freeze_V:
            V_new = V
        else:
            V_new = _rk4_monomer(V, U, dt, p)
        c = p.tau * 0.5 * (V + V_new) * dt / dx
        if c > 1.0 + 1e-12:
            raise CflViolation(f"Courant number {c:.4f} > 1 at t={t0 + k * dt:.6g}")
        V = V_new

        u[1:] -= c * (u[1:] - u[:-1])
        # decay and gain over one step, gain integrated by the trapezoid rule in time
        g_start = suffix_trapezoid(u, dx)
        predictor = decay * (u + two_beta_dt * g_start)
        g_end = suffix_trapezoid(predictor, dx)
        u = decay * (u + 0.5 * two_beta_dt * g_start) + 0.5 * two_beta_dt * g_end
        # the half cell at x0 carries gain that the inflow condition removes from node 0;
        # hand it to node 1 so the discrete polymer count stays consistent
        u[1] += 0.5 * u[0]
        u[0] = 0.0
        u[-1] = 0.0
        if u.min() < -NEG_TOL:
            raise NegativeDensity(f"density dropped to {u.min():.3e} at t={t0 + k * dt:.6g}")

        U, P = float(w @ u), float(wx @ u)
        t = t0 + k * dt
        hist[k] = (t, U, V, P)
        if k % snap_stride == 0 or k == n_steps:
            run.states.append(PideState(t, V, Density(grid, u, ORIGINAL)))

    run.history = hist
    return run


def mass_balance_residual(run: PideRun) -> np.ndarray:
    """|d/dt (V + P) - (lam - gamma V - mu P)| at interior snapshots.

    The derivative is a centred difference across neighbouring snapshots.
    """
    if len(run.states) < 3:
        raise ValueError("need at least 3 snapshots")
    p = run.params
    t = run.times
    V = np.array([s.V for s in run.states])
    P = np.array([moments(s.u)[1] for s in run.states])
    total = V + P
    ddt = (total[2:] - total[:-2]) / (t[2:] - t[:-2])
    rhs = p.lam - p.gamma * V[1:-1] - p.mu * P[1:-1]
    return np.abs(ddt - rhs)


def support_edge(u: Density, tol: float = 0.0) -> float:
    """Largest node where u exceeds ``tol`` (x_left if none)."""
    idx = np.nonzero(u.values > tol)[0]
    return float(u.grid.nodes[idx[-1]]) if idx.size else float(u.grid.x_left)
