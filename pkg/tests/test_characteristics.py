import math

import numpy as np
import pytest

from prion_dynamics import characteristics as ch
from prion_dynamics.errors import NoiseDominated, OutOfBoundaryRegion
from prion_dynamics.model import (DISEASE, ORIGINAL, SHIFTED, Density, Grid, Params,
                                  stationary_density, weighted_norm)
from prion_dynamics.ode import OmegaPath, integrate_ode, omega_path_from_trajectory
from prion_dynamics.pide import PideState, integrate_pide, moments
from prion_dynamics.verify import aligned_time_nodes, bump

SUPER = Params(10, 1, 1, 1, 1, 1)
SUB = Params(1, 1, 1, 1, 1, 1)


def linear_omega(t_end=1.0):
    """omega(r) = 1 + r, exactly represented by the Hermite pieces."""
    times = np.linspace(0.0, t_end, 5)
    return OmegaPath(times, 1.0 + times, np.ones_like(times))


# --------------------------------------------------------------------------- v transform


def test_v_transform_of_zero():
    grid = Grid(1.0, 11.0, 100)
    assert np.all(ch.v_transform(Density.zeros(grid, ORIGINAL)).values == 0)


def test_v_transform_of_exponential():
    grid = Grid(0.0, 40.0, 4000)
    v = ch.v_transform(Density(grid, np.exp(-grid.nodes), SHIFTED))
    assert np.max(np.abs(v.values - np.exp(-grid.nodes))) < 2 * grid.dx ** 2
    assert v.frame == SHIFTED and v.values[-1] == 0.0


def test_v_boundary_value_is_moment_combination():
    grid = Grid(1.0, 21.0, 1000)
    u = bump(grid, 2.0, 5.0, mass=3.0)
    U, P = moments(u)
    assert ch.v_transform(u).values[0] == pytest.approx(P - 1.0 * U, rel=1e-13)


def test_v_is_convex_nonincreasing_and_nonnegative():
    grid = Grid(1.0, 21.0, 500)
    v = ch.v_transform(bump(grid, 3.0, 7.0)).values
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all(np.diff(v, 2) >= -1e-15)


def test_recover_u_inverts_v_transform():
    grid = Grid(1.0, 21.0, 1000)
    u = bump(grid, 2.0, 6.0)
    back = ch.recover_u(ch.v_transform(u))
    # exact up to roundoff amplified by 1/dx^2
    assert np.max(np.abs(back.values[1:-1] - u.values[1:-1])) < 1e-10 * u.values.max()


def test_recover_u_of_exponential_and_zero():
    grid = Grid(0.0, 20.0, 2000)
    x = grid.nodes
    u = ch.recover_u(ch.VField(grid, np.exp(-x), frame=SHIFTED))
    assert np.max(np.abs(u.values - np.exp(-x))) < grid.dx ** 2
    assert np.all(ch.recover_u(ch.VField(grid, np.zeros(x.size))).values == 0)


def test_recover_u_noise_dominated():
    grid = Grid(0.0, 10.0, 100)
    rng = np.random.default_rng(0)
    with pytest.raises(NoiseDominated):
        ch.recover_u(ch.VField(grid, rng.standard_normal(grid.n + 1)))


# --------------------------------------------------------------------------- characteristic feet


def test_rho_inverse_constant_speed():
    assert ch.rho_inverse(OmegaPath.constant(4.0, 2.0), 0.0, 2.0, 4.0) == pytest.approx(1.0, abs=1e-12)


def test_rho_inverse_linear_speed():
    w = linear_omega()
    assert ch.rho_inverse(w, 0.0, 1.0, 1.5) == pytest.approx(0.0, abs=1e-12)
    rho = ch.rho_inverse(w, 0.0, 1.0, 0.7)
    assert abs(float(w.integral(rho, 1.0)) - 0.7) < 1e-12


def test_rho_inverse_out_of_region():
    with pytest.raises(OutOfBoundaryRegion):
        ch.rho_inverse(OmegaPath.constant(1.0, 1.0), 0.0, 1.0, 2.0)


def test_trace_decay_matches_gauss_legendre():
    w = linear_omega(3.0)
    for x in (0.5, 2.0, 9.0):
        tr = ch.trace_characteristic(w, 0.0, 3.0, x, 2.0, 1.0)
        assert tr.branch == ("initial" if x >= float(w.integral(0.0, 3.0)) else "boundary")
        gauss = ch.decay_exponent_gauss(w, tr.foot_time, tr.foot_x, 3.0, 2.0, 1.0)
        assert abs(gauss - tr.decay) < 1e-10 * max(1.0, tr.decay)


# --------------------------------------------------------------------------- U0 and V0


def test_U0_identity_at_equal_times():
    grid = Grid(0.0, 10.0, 100)
    g = bump(grid, 1.0, 3.0, frame=SHIFTED)
    assert ch.U0_apply(OmegaPath.constant(2.0, 1.0), 0.5, 0.5, g, 2.0, 1.0) is g


def test_U0_indicator_example():
    grid = Grid(0.0, 5.0, 500)
    x = grid.nodes
    g = Density(grid, np.where(x <= 1.0, 1.0, 0.0), SHIFTED)
    out = ch.U0_apply(OmegaPath.constant(1.0, 1.0), 0.0, 1.0, g, 2.0, 1.0).values
    inner = (x > 1.0 + 1e-9) & (x < 2.0 - 1e-9)
    expected = np.exp(-(2.0 + (x - 1.0) + 0.5))
    assert np.allclose(out[inner], expected[inner], rtol=1e-13, atol=0)
    assert np.all(out[(x < 1.0 - 1e-9) | (x > 2.0 + grid.dx)] == 0)


def test_V0_zero_boundary():
    grid = Grid(0.0, 10.0, 100)
    out = ch.V0_apply(OmegaPath.constant(4.0, 1.0), 0.0, 1.0, lambda t: np.zeros_like(t), grid, 2.0, 1.0)
    assert np.all(out.values == 0)


def test_V0_unit_boundary_example():
    grid = Grid(0.0, 10.0, 1000)
    out = ch.V0_apply(OmegaPath.constant(4.0, 1.0), 0.0, 1.0, np.ones_like, grid, 2.0, 1.0).values
    x = grid.nodes
    assert out[0] == 1.0
    assert np.all(out[x >= 4.0] == 0) and np.all(out[x < 4.0] > 0)
    # x = omega (t - rho): decay 2 s + s^2 * 4 / 2 with s = x / 4
    s = x[x < 4.0] / 4.0
    assert np.allclose(out[x < 4.0], np.exp(-(2.0 * s + 2.0 * s * s)), rtol=1e-12)


def test_V0_norm_bound():
    grid = Grid(0.0, 20.0, 2000)
    w = linear_omega(2.0)
    h = lambda t: np.sin(3 * np.asarray(t)) ** 2  # noqa: E731
    for span in (0.5, 1.0, 2.0):
        out = ch.V0_apply(w, 2.0 - span, 2.0, h, grid, 2.0, 1.0)
        bound = ch.V0_norm_bound(1.0, 3.0, span, 2.0, 2.0)
        assert weighted_norm(out, 2.0) <= bound


def test_U0_contracts_smooth_data():
    # smooth data contract at exp(-mu0 dt); point masses at the inflow end do not
    grid = Grid(0.0, 50.0, 2000)
    g = bump(grid, 3.0, 8.0, frame=SHIFTED)
    for dt in (0.1, 0.5, 1.0):
        out = ch.U0_apply(OmegaPath.constant(4.0, dt), 0.0, dt, g, 2.0, 1.0)
        assert weighted_norm(out, 2.0) <= math.exp(-2.0 * dt) * weighted_norm(g, 2.0)


# --------------------------------------------------------------------------- v-route solutions


def test_zero_data_gives_zero_fields():
    grid = Grid(1.0, 21.0, 400)
    fields = ch.solve_v_characteristics(SUPER, OmegaPath.constant(4.0, 3.0), Density.zeros(grid, ORIGINAL),
                                        lambda t: np.zeros_like(np.asarray(t, float)), [0.0, 1.0, 3.0])
    assert all(np.all(f.values == 0) for f in fields)


def test_vanishing_beta_is_pure_transport():
    p = Params(1.0, 1.0, 1.0, 1e-12, 0.7, 1.0)
    grid = Grid(1.0, 21.0, 400)
    u0 = bump(grid, 2.0, 5.0)
    t = 2.0
    v = ch.solve_v_characteristics(p, OmegaPath.constant(1.0, t), u0,
                                   lambda s: np.zeros_like(np.asarray(s, float)), [t])[0]
    v0 = ch.v_transform(u0).values
    shift = int(round(t / grid.dx))
    expected = v0[:-shift] * math.exp(-0.7 * t)
    assert np.allclose(v.values[shift:], expected, rtol=1e-9, atol=1e-300)
    assert np.all(v.values[:shift] == 0)


def test_region_split_ignores_boundary():
    grid = Grid(1.0, 21.0, 400)
    u0 = bump(grid, 2.0, 5.0)
    w = OmegaPath.constant(3.0, 2.0)
    h1 = lambda t: 1.0 + np.asarray(t, float)  # noqa: E731
    h2 = lambda t: 5.0 * np.cos(np.asarray(t, float)) ** 2  # noqa: E731
    a = ch.solve_v_characteristics(SUPER, w, u0, h1, [0.5, 2.0])
    b = ch.solve_v_characteristics(SUPER, w, u0, h2, [0.5, 2.0])
    for t, fa, fb in zip((0.5, 2.0), a, b):
        beyond = grid.nodes - 1.0 >= 3.0 * t
        assert np.array_equal(fa.values[beyond], fb.values[beyond])
        assert not np.array_equal(fa.values, fb.values)


@pytest.mark.slow
def test_supercritical_v_route_reaches_stationary_density():
    grid = Grid(1.0, 51.0, 2000)
    u_star = stationary_density(SUPER, grid)
    u0 = u_star * 0.5
    U, P = moments(u0)
    traj = integrate_ode(SUPER, (U, 4.0, P), 100.0)
    w = omega_path_from_trajectory(traj, DISEASE, require_converged=False)
    v = ch.solve_v_characteristics(SUPER, w, u0, ch.boundary_from_trajectory(traj), [100.0])[0]
    u = ch.recover_u(v)
    assert weighted_norm(u - u_star, 2.0) / weighted_norm(u_star, 2.0) < 0.02


# --------------------------------------------------------------------------- Picard


@pytest.fixture(scope="module")
def picard_setup():
    grid = Grid(0.0, 25.0, 1000)
    g = bump(grid, 0.5, 3.0, frame=SHIFTED)
    w = OmegaPath.constant(1.0, 2.0)
    return w, g, ch.picard_solve(w, 0.0, g, 2.0, SUB.mu0, SUB.beta,
                                 n_time=aligned_time_nodes(1.0, 2.0, grid.dx))


def test_picard_zero_data():
    grid = Grid(0.0, 10.0, 200)
    its = ch.picard_iterate(OmegaPath.constant(1.0, 1.0), 0.0, Density.zeros(grid, SHIFTED), 1.0, 5,
                            SUB.mu0, SUB.beta)
    assert len(its) >= 1 and all(np.all(it.values == 0) for it in its)


def test_picard_monotone_bounded_and_mild(picard_setup):
    w, g, res = picard_setup
    its = [it.values for it in res.iterates]
    assert len(its) > 2 and res.converged
    for lo, hi in zip(its[:-1], its[1:]):
        assert np.all(hi - lo >= -1e-12)
    assert all(np.all(it >= 0) for it in its)
    assert res.max_norm <= res.bound
    assert ch.mild_residual(w, 0.0, g, res, SUB.mu0, SUB.beta) < 1e-6


def test_picard_agrees_with_frozen_speed_upwind(picard_setup):
    w, g, res = picard_setup
    grid = Grid(1.0, 26.0, 1000)
    u0 = bump(grid, 1.5, 4.0)
    assert np.allclose(u0.values, g.values, rtol=1e-12, atol=0)
    run = integrate_pide(SUB, PideState(0.0, 1.0, u0), 2.0, freeze_V=True)
    a = SUB.mu0 / SUB.beta
    gap = weighted_norm(run.final.u.to_shifted(1.0) - res.final, a) / weighted_norm(g, a)
    assert gap < 1e-2
