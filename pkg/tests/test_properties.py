"""Property-based checks of the invariants shared by all solvers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prion_dynamics import characteristics as ch
from prion_dynamics import spectral as sp
from prion_dynamics.model import DISEASE, DISEASE_FREE, ORIGINAL, SHIFTED, Density, Grid, Params
from prion_dynamics.ode import OmegaPath, integrate_ode
from prion_dynamics.pide import PideState, integrate_pide
from prion_dynamics.verify import bump, random_profile

SUPER = Params(10, 1, 1, 1, 1, 1)
SUB = Params(1, 1, 1, 1, 1, 1)

rate = st.floats(min_value=0.2, max_value=5.0)
seeds = st.integers(0, 2 ** 32 - 1)


@st.composite
def params(draw):
    return Params(draw(st.floats(0.5, 20.0)), draw(rate), draw(rate), draw(rate), draw(rate),
                  draw(st.floats(0.2, 3.0)))


@given(params(), st.floats(0, 5), st.floats(0, 20), st.floats(0, 5))
def test_ode_cone_invariance(p, U, V, extra):
    traj = integrate_ode(p, (U, V, p.x0 * U + extra), 10.0)
    assert np.all(traj.U >= -1e-8) and np.all(traj.V >= -1e-8)
    assert np.all(traj.P - p.x0 * traj.U >= -1e-8)


@settings(max_examples=15)
@given(params(), seeds, st.floats(0, 10))
def test_pide_positivity(p, seed, V0):
    grid = Grid(p.x0, p.x0 + 20.0, 200)
    u0 = Density(grid, random_profile(np.random.default_rng(seed), grid.nodes), ORIGINAL)
    run = integrate_pide(p, PideState(0.0, V0, u0), 1.0, snapshot_every=0.25)
    assert np.all(run.history[:, 2] >= 0)
    for s in run.states:
        assert s.u.values.min() >= 0


@settings(max_examples=10)
@given(seeds, st.floats(0.5, 3.0), st.floats(0.3, 1.5))
def test_picard_iterates_increase(seed, omega, t):
    grid = Grid(0.0, 15.0, 150)
    g = Density(grid, random_profile(np.random.default_rng(seed), grid.nodes), SHIFTED)
    res = ch.picard_solve(OmegaPath.constant(omega, t), 0.0, g, t, SUB.mu0, SUB.beta, n_iter=8)
    its = [it.values for it in res.iterates]
    assert its[0].min() >= 0
    for lo, hi in zip(its[:-1], its[1:]):
        assert np.all(hi - lo >= -1e-12)
    assert res.max_norm <= res.bound


@given(st.floats(0.5, 10.0), st.floats(1.0, 8.0), st.floats(0.1, 5.0), st.booleans())
def test_v_transform_recover_u_inverse(lo, width, mass, shifted):
    grid = Grid(0.0 if shifted else 1.0, 30.0, 600)
    u = bump(grid, grid.x_left + lo, grid.x_left + lo + width, mass, SHIFTED if shifted else ORIGINAL)
    v = ch.v_transform(u)
    # beyond the support v = P - x U cancels to roundoff
    assert np.all(v.values >= -1e-13 * np.max(v.values))
    back = ch.recover_u(v)
    assert np.max(np.abs(back.values[1:-1] - u.values[1:-1])) <= 1e-9 * np.max(u.values)


@pytest.fixture(scope="module")
def disease_ctx():
    return sp.OperatorContext.from_params(SUPER, DISEASE, n=1000, span=50.0)


@given(seeds, st.floats(0.1, 10.0))
def test_resolvent_l1_bound(disease_ctx, seed, lam):
    ctx = disease_ctx
    f = ctx.density(random_profile(np.random.default_rng(seed), ctx.x, signed=True))
    u = sp.resolvent_A(ctx, lam, f)
    w = ctx.grid.weights
    assert w @ np.abs(u.values) <= (w @ np.abs(f.values)) / (lam + ctx.mu0)


@given(seeds)
def test_projection_idempotent(disease_ctx, seed):
    ctx = disease_ctx
    u = ctx.density(random_profile(np.random.default_rng(seed), ctx.x, signed=True))
    pu = sp.ergodic_projection(ctx, u)
    assert ctx.norm(sp.ergodic_projection(ctx, pu) - pu) < 1e-10 * max(ctx.norm(u), 1.0)


def compatible(ctx, vals):
    """Add alpha x e^{-x} so that omega u'(0) equals the gain 2 beta int u at x = 0.

    With omega = 4, beta = 1 and a profile that is flat at 0 this gives
    alpha = int v. Data violating this corner condition pick up an O(dx^2)
    boundary-layer error in the discrete norm.
    """
    alpha = float(ctx.grid.weights @ vals)
    return ctx.density(vals + alpha * ctx.x * np.exp(-ctx.x))


@settings(max_examples=8)
@given(seeds)
def test_semigroup_nonexpansive_disease(seed):
    ctx = sp.OperatorContext.from_params(SUPER, DISEASE, n=500, span=25.0)
    u = compatible(ctx, random_profile(np.random.default_rng(seed), ctx.x))
    u = u * (1.0 / ctx.norm(u))
    for t in (0.1, 1.0, 5.0):
        assert ctx.norm(sp.semigroup_step(ctx, u, t)) <= 1.0 + 1e-6


@settings(max_examples=8)
@given(seeds, st.floats(0.5, 2.0))
def test_semigroup_nonexpansive_disease_free(seed, a):
    ctx = sp.OperatorContext.from_params(SUB, DISEASE_FREE, n=500, span=25.0, a=a)
    u = ctx.density(random_profile(np.random.default_rng(seed), ctx.x))
    u = u * (1.0 / ctx.norm(u))
    for t in (0.1, 1.0, 5.0):
        assert ctx.norm(sp.semigroup_step(ctx, u, t)) <= 1.0 + 1e-6


def test_incompatible_data_excess_is_second_order():
    excess = []
    for n in (500, 1000):
        ctx = sp.OperatorContext.from_params(SUPER, DISEASE, n=n, span=25.0)
        rng = np.random.default_rng(0)
        worst = -np.inf
        for _ in range(3):
            u = ctx.density(random_profile(rng, ctx.x))
            u = u * (1.0 / ctx.norm(u))
            worst = max(worst, ctx.norm(sp.semigroup_step(ctx, u, 1.0)) - 1.0)
        excess.append(worst)
    assert excess[0] > 0
    assert excess[1] < 0.3 * excess[0]
