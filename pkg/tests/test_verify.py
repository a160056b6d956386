import json

import numpy as np
import pytest

from prion_dynamics import model, spectral, verify
from prion_dynamics.model import Grid
from prion_dynamics.verify import (ERROR, FAIL, LOGGED, PASS, CheckResult, PositivityTracker,
                                   VerificationReport, aligned_time_nodes, bump, random_profile)


def test_kernel_and_stationary_checks_pass():
    tracker = PositivityTracker()
    assert verify.check_kernel_residual("quick", tracker).status == PASS
    assert verify.check_stationary_moments("quick", tracker).status == PASS


def test_sign_flipped_phi_is_caught(monkeypatch):
    real = model.phi
    monkeypatch.setattr(model, "phi", lambda r: -real(r))
    monkeypatch.setattr(spectral, "phi", lambda r: -real(r))
    tracker = PositivityTracker()
    assert verify.check_kernel_residual("quick", tracker).status == FAIL
    assert verify.check_stationary_moments("quick", tracker).status == FAIL


def test_report_status_ignores_logged_checks():
    report = VerificationReport("quick", [CheckResult("a", "1", PASS, 0.0, 1.0),
                                          CheckResult("b", "log", LOGGED, 5.0, 1.0)])
    assert report.status == PASS
    report.checks.append(CheckResult("c", "2", ERROR, float("nan"), 1.0))
    assert report.status == FAIL
    assert report.check("b").measured == 5.0
    with pytest.raises(KeyError):
        report.check("missing")


def test_report_json_structure():
    report = VerificationReport("quick", [CheckResult("a", "1", PASS, 0.5, 1.0, 0.1, {"n": 3})], 0.1)
    data = json.loads(report.to_json())
    assert list(data) == ["level", "status", "runtime", "checks"]
    assert list(data["checks"][0]) == ["name", "criterion", "status", "measured", "bound", "runtime",
                                       "detail"]
    assert report.summary_lines()[-1].startswith("overall: pass")


def test_timed_turns_exceptions_into_errors():
    def check_broken(level, tracker):
        raise RuntimeError("boom")

    res = verify._timed(check_broken, "quick", PositivityTracker())
    assert res.status == ERROR and res.name == "broken" and "boom" in res.detail["error"]


def test_unknown_level():
    with pytest.raises(ValueError):
        verify.verify_suite("medium")


def test_positivity_tracker():
    t = PositivityTracker()
    t.see("a", np.array([1.0, 0.0]))
    t.see("b", np.array([-1e-12, 3.0]))
    assert t.minimum == -1e-12 and t.sources == {"a": 0.0, "b": -1e-12}
    assert verify.check_positivity("quick", t).status == PASS
    t.see("c", np.array([-1e-9]))
    assert verify.check_positivity("quick", t).status == FAIL


def test_bump_has_compact_support_and_mass():
    grid = Grid(1.0, 11.0, 1000)
    u = bump(grid, 2.0, 4.0, mass=3.0)
    x = grid.nodes
    assert np.all(u.values[(x <= 2.0) | (x >= 4.0)] == 0)
    assert float(grid.weights @ u.values) == pytest.approx(3.0, rel=1e-14)


def test_random_profile_vanishes_at_inflow():
    x = np.linspace(0.0, 50.0, 2001)
    v = random_profile(np.random.default_rng(0), x)
    assert v[0] == 0.0 and np.all(v >= 0)
    assert abs(v[1]) < 1e-2 * np.max(v)


def test_aligned_time_nodes():
    assert aligned_time_nodes(1.0, 2.0, 0.025) == 81
    n = aligned_time_nodes(1.0, 2.0, 0.0125)
    assert n >= 64 and (160 % (n - 1)) == 0
    assert aligned_time_nodes(1.0, 2.0, 0.03) == 64


def test_ladder_ratio():
    assert verify._ladder_ratio([0.4, 0.2]) == pytest.approx(0.5)
