import numpy as np
import pytest

from prion_dynamics.errors import ConeViolation, NotConverged
from prion_dynamics.model import DISEASE, DISEASE_FREE, OdeState, Params, disease_equilibrium_ode
from prion_dynamics.ode import (OdeTrajectory, OmegaPath, equilibrium_distance, fitted_decay_rate,
                                integrate_ode, ode_rhs, omega_path_from_trajectory)
from prion_dynamics.io import read_csv

SUPER = Params(10, 1, 1, 1, 1, 1)
SUB = Params(1, 1, 1, 1, 1, 1)


def test_rhs_examples():
    assert tuple(ode_rhs(OdeState(2, 4, 6), SUPER)) == (0.0, 0.0, 0.0)
    assert tuple(ode_rhs(OdeState(1, 1, 1), SUPER)) == (-2.0, 9.0, -1.0)
    for p in (SUB, SUPER, Params(3, 2, 0.5, 0.1, 0.7, 2)):
        assert tuple(ode_rhs(OdeState(0, p.lam / p.gamma, 0), p)) == (0.0, 0.0, 0.0)


def test_equilibrium_residual_supercritical():
    for p in (SUPER, Params(8, 1, 1, 1, 1, 1), Params(7.3, 0.4, 1.1, 0.3, 0.9, 1.7)):
        assert max(abs(r) for r in ode_rhs(disease_equilibrium_ode(p), p)) < 1e-12


def test_supercritical_run_reaches_disease_equilibrium():
    traj = integrate_ode(SUPER, (0.1, 4, 0.3), 200)
    assert equilibrium_distance(traj.final, (2, 4, 6)) < 1e-4


def test_subcritical_run_reaches_disease_free_equilibrium():
    traj = integrate_ode(SUB, (1, 1, 2), 100)
    assert equilibrium_distance(traj.final, (0, 1, 0)) < 1e-6


def test_equilibrium_start_is_invariant():
    traj = integrate_ode(SUPER, (0, 10, 0), 50)
    assert np.all(traj.U == 0) and np.all(traj.P == 0)
    assert np.allclose(traj.V, 10, rtol=0, atol=1e-12)


def test_output_respects_max_step_and_cone():
    traj = integrate_ode(SUPER, (0.1, 4, 0.3), 20, max_step=0.25)
    assert np.all(np.diff(traj.times) <= 0.25 + 1e-12)
    assert np.all(traj.U >= 0) and np.all(traj.V >= 0)
    assert np.all(traj.P - SUPER.x0 * traj.U >= 0)


def test_initial_state_outside_cone_rejected():
    with pytest.raises(ConeViolation):
        integrate_ode(SUPER, (1, 1, 0.5), 1)


def test_subcritical_total_decays_exponentially():
    traj = integrate_ode(SUB, (1, 1, 2), 40)
    rate = fitted_decay_rate(traj.times, traj.U + traj.P, 20, 40)
    assert rate > 0


def test_tightening_tolerance_reduces_error():
    # compared mid-transient, since by t ~ 30 every run sits on the equilibrium to roundoff
    ref = integrate_ode(SUPER, (0.1, 4, 0.3), 3, rel_tol=1e-13, abs_tol=1e-15, max_step=np.inf)
    errs = []
    for tol in (1e-4, 1e-6, 1e-8):
        traj = integrate_ode(SUPER, (0.1, 4, 0.3), 3, rel_tol=tol, abs_tol=tol * 1e-3, max_step=np.inf)
        errs.append(equilibrium_distance(traj.final, ref.final))
    assert errs[0] > errs[1] > errs[2]


def test_trajectory_csv(tmp_path):
    traj = integrate_ode(SUPER, (0.1, 4, 0.3), 5)
    traj.to_csv(tmp_path / "t.csv")
    header, rows = read_csv(tmp_path / "t.csv")
    assert header == ["t", "U", "V", "P"]
    assert np.array_equal(rows[:, 0], traj.times)
    assert np.array_equal(rows[:, 1:], traj.states)


def test_constant_omega_path():
    w = OmegaPath.constant(4.0, 10.0)
    assert float(w(3.3)) == 4.0
    assert float(w.integral(0.0, 2.5)) == pytest.approx(10.0, rel=1e-15)
    # int_s^t (t - r) * 4 dr = 2 (t - s)^2
    assert float(w.lag_integral(1.0, 4.0)) == pytest.approx(18.0, rel=1e-14)


def test_omega_path_from_constant_trajectory():
    times = np.linspace(0, 5, 11)
    states = np.tile([0.0, 4.0, 0.0], (times.size, 1))
    p = Params(4, 1, 1, 1, 1, 1)
    w = omega_path_from_trajectory(OdeTrajectory(times, states, p), DISEASE_FREE)
    assert np.allclose(w(times), 4.0)
    assert np.allclose(w.C(times) - w.C(0.0), 4.0 * times, atol=1e-13)


def test_omega_path_from_disease_run():
    traj = integrate_ode(SUPER, (0.1, 4, 0.3), 200)
    w = omega_path_from_trajectory(traj, DISEASE)
    assert w.omega_inf == 4.0
    assert abs(float(w(200.0)) - 4.0) < 1e-8


def test_omega_path_from_disease_free_run():
    traj = integrate_ode(SUB, (1, 1, 2), 100)
    assert omega_path_from_trajectory(traj, DISEASE_FREE).omega_inf == 1.0


def test_omega_path_not_converged():
    traj = integrate_ode(SUPER, (0.1, 4, 0.3), 5)
    with pytest.raises(NotConverged):
        omega_path_from_trajectory(traj, DISEASE)
    w = omega_path_from_trajectory(traj, DISEASE, require_converged=False)
    assert w.t_end == 5.0


def test_omega_path_cumulative_is_exact_for_cubics():
    # omega(t) = 1 + t, Hermite data reproduce it exactly
    times = np.array([0.0, 0.7, 2.0])
    w = OmegaPath(times, 1 + times, np.ones(3))
    assert float(w.integral(0.0, 2.0)) == pytest.approx(4.0, rel=1e-15)
    # int_0^2 (2 - r)(1 + r) dr = 10/3
    assert float(w.lag_integral(0.0, 2.0)) == pytest.approx(10 / 3, rel=1e-14)
    with pytest.raises(ValueError):
        w(2.5)
