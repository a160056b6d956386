"""Execute a scenario and write its trajectory, snapshots and manifest."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import characteristics as ch
from .config import ScenarioConfig
from .errors import PrionModelError, ValidationError
from .io import write_csv, write_density_csv, write_json
from .model import OdeState, Threshold, disease_equilibrium_ode, threshold_classify, weighted_norm
from .ode import equilibrium_distance, integrate_ode, omega_path_from_trajectory
from .pide import PideState, integrate_pide, moments

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3

# the only field of the manifest that differs between identical runs
TIMESTAMP_KEY = "created_at"


@dataclass
class RunResult:
    status: int
    message: str = ""
    manifest: dict = field(default_factory=dict)
    out_dir: Path | None = None


def snapshot_times(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.snapshot_every is None:
        return np.array([0.0, cfg.t_end])
    n = int(np.floor(cfg.t_end / cfg.snapshot_every + 1e-9))
    times = cfg.snapshot_every * np.arange(n + 1)
    if cfg.t_end - times[-1] > 1e-9 * cfg.t_end:
        times = np.append(times, cfg.t_end)
    return times


def _target_state(cfg):
    p = cfg.params
    if threshold_classify(p) is Threshold.SUPERCRITICAL:
        return disease_equilibrium_ode(p)
    return OdeState(0.0, p.lam / p.gamma, 0.0)


def _density_diagnostics(cfg, snaps):
    p = cfg.params
    a = p.mu0 / p.beta
    U, P = np.array([moments(u) for _, _, u in snaps]).T
    return {
        "t": [t for t, _, _ in snaps],
        "norm": [weighted_norm(u, a) for _, _, u in snaps],
        "U": U,
        "P": P,
        "V": [V for _, V, _ in snaps],
        "min_density": min(float(u.values.min()) for _, _, u in snaps),
    }


def _run_ode(cfg, out, files, diag):
    traj = integrate_ode(cfg.params, cfg.initial_ode_state(), cfg.t_end, rel_tol=cfg.rel_tol,
                         abs_tol=cfg.abs_tol, max_step=cfg.max_step)
    traj.to_csv(out / "trajectory.csv")
    files["trajectory"] = "trajectory.csv"
    target = _target_state(cfg)
    diag["ode"] = {
        "final": list(traj.final),
        "target": list(target),
        "relative_distance_to_target": equilibrium_distance(traj.final, target),
        "steps": int(traj.times.size - 1),
    }
    return traj


def _run_pide(cfg, out, files, diag):
    p = cfg.params
    grid = cfg.grid
    init = PideState(0.0, cfg.initial_V, cfg.initial_density())
    run = integrate_pide(p, init, cfg.t_end, grid=grid, dt=cfg.dt, snapshot_every=cfg.snapshot_every)
    names = []
    for k, state in enumerate(run.states):
        name = f"pide_{k:04d}.csv"
        write_density_csv(out / "snapshots" / name, state.u)
        names.append(f"snapshots/{name}")
    write_csv(out / "pide_moments.csv", ["t", "U", "V", "P"], run.history)
    files["pide_moments"] = "pide_moments.csv"
    files["pide_snapshots"] = names
    d = _density_diagnostics(cfg, [(s.t, s.V, s.u) for s in run.states])
    d["dt"] = run.dt
    d["mass_residual"] = _history_mass_residual(p, run.history)
    diag["pide"] = d
    return run


def _history_mass_residual(p, hist):
    """Max |d/dt (V + P) - (lam - gamma V - mu P)| over interior steps (centred differences)."""
    if hist.shape[0] < 3:
        return float("nan")
    t, _, V, P = hist.T
    total = V + P
    ddt = (total[2:] - total[:-2]) / (t[2:] - t[:-2])
    rhs = p.lam - p.gamma * V[1:-1] - p.mu * P[1:-1]
    return float(np.max(np.abs(ddt - rhs)))


def _run_characteristics(cfg, out, files, diag):
    """Moment-ODE driven characteristics route.

    The ODE starts from the moments of the initial density (with V0) so that
    the boundary flux P - x0 U matches the density being transported.
    """
    p = cfg.params
    u0 = cfg.initial_density()
    U, P = moments(u0)
    traj = integrate_ode(p, OdeState(U, cfg.initial_V, P), cfg.t_end, rel_tol=cfg.rel_tol,
                         abs_tol=cfg.abs_tol, max_step=cfg.max_step)
    w = omega_path_from_trajectory(traj, cfg.resolved_regime, require_converged=False)
    boundary = ch.boundary_from_trajectory(traj)
    times = snapshot_times(cfg)
    fields = ch.solve_v_characteristics(p, w, u0, boundary, times)
    V_at = traj.interpolant()(times)[:, 1]
    snaps = []
    names = []
    for k, (t, V, vf) in enumerate(zip(times, V_at, fields)):
        u = ch.recover_u(vf)
        name = f"characteristics_{k:04d}.csv"
        write_density_csv(out / "snapshots" / name, u)
        names.append(f"snapshots/{name}")
        snaps.append((float(t), float(V), u))
    files["characteristics_snapshots"] = names
    diag["characteristics"] = _density_diagnostics(cfg, snaps)
    return snaps


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Run the selected solvers; never raises for solver or validation failures.

    Files land in ``out_dir`` (default ``cfg.out``): ``trajectory.csv``,
    ``pide_moments.csv``, ``snapshots/*.csv`` and ``manifest.json``.
    """
    out = Path(cfg.out if out_dir is None else out_dir)
    files, diag = {}, {}
    p = cfg.params
    manifest = {
        "params": p.as_dict(),
        "R": p.R,
        "regime": cfg.resolved_regime,
        "solvers": list(cfg.solvers),
        "grid": cfg.grid.spec(),
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "snapshot_times": snapshot_times(cfg),
        "density": cfg.density.text(),
        "files": files,
        "diagnostics": diag,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        traj = run = None
        if "ode" in cfg.solvers:
            traj = _run_ode(cfg, out, files, diag)
        if "pide" in cfg.solvers:
            run = _run_pide(cfg, out, files, diag)
            manifest["dt"] = run.dt
        if "characteristics" in cfg.solvers:
            _run_characteristics(cfg, out, files, diag)
        if traj is not None and run is not None:
            U_ode = traj.final.U
            U_pide = float(run.history[-1, 1])
            diag["terminal_U_gap"] = abs(U_pide - U_ode) / max(abs(U_ode), np.finfo(float).tiny)
        status, message = EXIT_OK, "ok"
    except ValidationError as exc:
        status, message = EXIT_VALIDATION, f"validation error: {exc}"
    except (PrionModelError, ValueError, ArithmeticError) as exc:
        status, message = EXIT_SOLVER, f"solver failure ({type(exc).__name__}): {exc}"
    except OSError as exc:
        status, message = EXIT_SOLVER, f"cannot write output: {exc}"
    manifest["status"] = status
    manifest["message"] = message
    manifest[TIMESTAMP_KEY] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    files["manifest"] = "manifest.json"
    try:
        write_json(out / "manifest.json", manifest)
    except OSError as exc:
        if status == EXIT_OK:
            status, message = EXIT_SOLVER, f"cannot write manifest: {exc}"
    return RunResult(status, message, manifest, out)
