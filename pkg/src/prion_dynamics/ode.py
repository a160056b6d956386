"""The closed (U, V, P) moment system and the transport-speed path omega(t)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import ConeViolation, NotConverged, ToleranceNotMet
from .model import OdeState, Params, derive_constants

CLAMP_TOL = 1e-10


def ode_rhs(s, p: Params):
    U, V, P = s
    b, x0 = p.beta, p.x0
    dU = b * P - p.mu * U - 2 * b * x0 * U
    dV = p.lam - p.gamma * V - p.tau * U * V + b * x0 * x0 * U
    dP = p.tau * U * V - p.mu * P - b * x0 * x0 * U
    return dU, dV, dP


def _rhs_array(states, p):
    """Vectorised right-hand side for an (N, 3) array of states."""
    return np.column_stack(ode_rhs(states.T, p))


@dataclass(frozen=True, eq=False)
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray  # shape (N, 3), columns U, V, P
    params: Params

    @property
    def U(self):
        return self.states[:, 0]

    @property
    def V(self):
        return self.states[:, 1]

    @property
    def P(self):
        return self.states[:, 2]

    @property
    def final(self) -> OdeState:
        return OdeState(*map(float, self.states[-1]))

    def interpolant(self) -> CubicHermiteSpline:
        """C1 piecewise-cubic interpolant of (U, V, P) using the exact slopes."""
        return CubicHermiteSpline(self.times, self.states, _rhs_array(self.states, self.params), axis=0)

    def to_csv(self, path):
        from .io import write_csv
        write_csv(path, ["t", "U", "V", "P"], np.column_stack([self.times, self.states]))


def _clamp_to_cone(states, x0):
    U, V, P = states[:, 0], states[:, 1], states[:, 2]
    gap = P - x0 * U
    worst = min(U.min(), V.min(), gap.min())
    if worst < -CLAMP_TOL:
        raise ConeViolation(f"state left the cone K by {-worst:.3e}")
    out = states.copy()
    out[:, 0] = np.maximum(U, 0.0)
    out[:, 1] = np.maximum(V, 0.0)
    out[:, 2] = np.maximum(P, x0 * out[:, 0])
    return out


def integrate_ode(p: Params, init, t_end: float, rel_tol: float = 1e-9,
                  abs_tol: float = 1e-12, max_step: float = 0.5, t0: float = 0.0) -> OdeTrajectory:
    """Integrate the moment system with an adaptive Dormand-Prince 5(4) pair.

    One output row per accepted step; ``max_step`` bounds the spacing.
    """
    if not t_end > t0:
        raise ValueError("t_end must be after t0")
    y0 = np.asarray(tuple(init), dtype=float)
    if y0[0] < 0 or y0[1] < 0 or y0[2] < p.x0 * y0[0] - CLAMP_TOL:
        raise ConeViolation("initial state is not in the cone K")
    sol = solve_ivp(lambda t, y: ode_rhs(y, p), (t0, t_end), y0, method="RK45",
                    rtol=rel_tol, atol=abs_tol, max_step=max_step)
    if sol.status != 0:
        raise ToleranceNotMet(sol.message)
    states = _clamp_to_cone(sol.y.T, p.x0)
    return OdeTrajectory(sol.t, states, p)


class OmegaPath:
    """Transport speed omega(t) as a piecewise cubic with exact integrals.

    ``integral(s, t)`` is the integral of omega over [s, t] and
    ``lag_integral(s, t)`` is the integral of (t - r) omega(r) over [s, t];
    both are evaluated from the exact antiderivatives of the cubic pieces.
    """

    def __init__(self, times, omega, domega=None, omega_inf=None):
        times = np.asarray(times, dtype=float)
        omega = np.asarray(omega, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing with at least 2 samples")
        if domega is None:
            domega = np.gradient(omega, times)
        self.times = times
        self.omega = omega
        self.spline = CubicHermiteSpline(times, omega, np.asarray(domega, dtype=float))
        self._C = self.spline.antiderivative(1)
        self._D = self.spline.antiderivative(2)
        self.omega_inf = float(omega[-1] if omega_inf is None else omega_inf)
        probe = np.linspace(times[0], times[-1], 8 * times.size + 1)
        low = min(float(self.spline(probe).min()), float(omega.min()))
        if not low > 0:
            raise ValueError("omega must stay strictly positive")
        self.omega_min = low
        self.omega_max = max(float(self.spline(probe).max()), float(omega.max()))

    @classmethod
    def constant(cls, omega: float, t_end: float, t0: float = 0.0):
        return cls([t0, t_end], [omega, omega], [0.0, 0.0], omega_inf=omega)

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def cumulative(self):
        return self._C(self.times)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        slack = 1e-9 * max(1.0, abs(self.t_end))
        if np.any(t < self.t0 - slack) or np.any(t > self.t_end + slack):
            raise ValueError(f"time outside the path horizon [{self.t0}, {self.t_end}]")
        return np.clip(t, self.t0, self.t_end)

    def __call__(self, t):
        return self.spline(self._check(t))

    def C(self, t):
        return self._C(self._check(t))

    def integral(self, s, t):
        return self.C(t) - self.C(s)

    def lag_integral(self, s, t):
        s = self._check(s)
        t = self._check(t)
        return self._D(t) - self._D(s) - (t - s) * self._C(s)


def omega_path_from_trajectory(traj: OdeTrajectory, regime: str, tol: float = 1e-8,
                               require_converged: bool = True) -> OmegaPath:
    """omega = tau V with Hermite slopes from the exact right-hand side.

    With ``require_converged`` the terminal sample must be within ``tol`` of
    the regime's limiting speed; otherwise :class:`NotConverged` is raised.
    """
    p = traj.params
    omega_inf = derive_constants(p, regime).omega_inf
    omega = p.tau * traj.V
    gap = abs(omega[-1] - omega_inf)
    if require_converged and gap > tol * max(1.0, omega_inf):
        raise NotConverged(f"terminal |tau V - omega_inf| = {gap:.3e} exceeds {tol:.1e}")
    domega = p.tau * _rhs_array(traj.states, p)[:, 1]
    return OmegaPath(traj.times, omega, domega, omega_inf=omega_inf)


def fitted_decay_rate(times, values, t_lo, t_hi):
    """Slope of -log(values) from a least-squares line over [t_lo, t_hi]."""
    times = np.asarray(times)
    values = np.asarray(values)
    mask = (times >= t_lo) & (times <= t_hi) & (values > 0)
    if mask.sum() < 2:
        raise ValueError("not enough positive samples in the fitting window")
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    return -float(slope)


def equilibrium_distance(state, target):
    """Max componentwise relative error, absolute where the target is zero."""
    errs = []
    for got, want in zip(state, target):
        scale = abs(want) if want != 0 else 1.0
        errs.append(abs(got - want) / scale)
    return max(errs)

