import json

import numpy as np
import pytest

from prion_dynamics.config import parse_config
from prion_dynamics.io import read_csv
from prion_dynamics.runner import (EXIT_OK, EXIT_SOLVER, TIMESTAMP_KEY, run_scenario, snapshot_times)

SUPER = "lambda = 10\ngamma = 1\ntau = 1\nbeta = 1\nmu = 1\nx0 = 1\n"
SUB = "lambda = 1\ngamma = 1\ntau = 1\nbeta = 1\nmu = 1\nx0 = 1\n"


def test_snapshot_times():
    cfg = parse_config(SUPER + "t_end = 1\nsnapshot_every = 0.3")
    assert np.allclose(snapshot_times(cfg), [0, 0.3, 0.6, 0.9, 1.0])
    assert list(snapshot_times(parse_config(SUPER + "t_end = 2"))) == [0.0, 2.0]


def test_ode_only_reaches_disease_equilibrium(tmp_path):
    cfg = parse_config(SUPER + "t_end = 200\node_init = 0.1, 4, 0.3")
    res = run_scenario(cfg, tmp_path)
    assert res.status == EXIT_OK
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert header == ["t", "U", "V", "P"]
    assert np.allclose(rows[-1, 1:], (2, 4, 6), rtol=1e-4, atol=0)
    assert res.manifest["diagnostics"]["ode"]["relative_distance_to_target"] < 1e-4


def test_ode_and_pide_report_terminal_gap(tmp_path):
    cfg = parse_config(SUPER + "t_end = 5\nn = 500\nV0 = 4\ndensity = gaussian(4, 1, 1)\n"
                       "solvers = ode, pide\nsnapshot_every = 1")
    res = run_scenario(cfg, tmp_path)
    assert res.status == EXIT_OK
    gap = res.manifest["diagnostics"]["terminal_U_gap"]
    assert 0 <= gap < 0.05
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["files"]["pide_snapshots"][0] == "snapshots/pide_0000.csv"
    assert len(manifest["files"]["pide_snapshots"]) == 6
    assert set(manifest["diagnostics"]["pide"]) >= {"t", "norm", "U", "P", "V", "mass_residual"}


def test_zero_density_disease_free_snapshots(tmp_path):
    cfg = parse_config(SUB + "t_end = 3\nn = 200\nsolvers = pide, characteristics\nsnapshot_every = 1")
    res = run_scenario(cfg, tmp_path)
    assert res.status == EXIT_OK
    files = sorted((tmp_path / "snapshots").glob("*.csv"))
    assert len(files) == 8
    for f in files:
        header, rows = read_csv(f)
        assert header == ["x", "u"] and np.all(rows[:, 1] == 0)


def test_characteristics_route_tracks_pide(tmp_path):
    cfg = parse_config(SUPER + "t_end = 2\nn = 1000\nV0 = 4\ndensity = gaussian(5, 1, 1)\n"
                       "solvers = pide, characteristics")
    res = run_scenario(cfg, tmp_path)
    assert res.status == EXIT_OK
    _, a = read_csv(tmp_path / "snapshots" / "pide_0001.csv")
    _, b = read_csv(tmp_path / "snapshots" / "characteristics_0001.csv")
    w = np.full(a.shape[0], a[1, 0] - a[0, 0])
    assert np.sum(w * np.abs(a[:, 1] - b[:, 1])) < 0.05 * np.sum(w * b[:, 1])


def test_solver_failure_is_reported(tmp_path):
    cfg = parse_config(SUPER + "t_end = 1\nn = 100\nsolvers = pide\ndt = 1\ndensity = gaussian(4, 1, 1)")
    res = run_scenario(cfg, tmp_path)
    assert res.status == EXIT_SOLVER and "CflViolation" in res.message
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == EXIT_SOLVER


def test_runs_are_deterministic(tmp_path):
    cfg = parse_config(SUPER + "t_end = 2\nn = 300\nV0 = 4\ndensity = gaussian(4, 1, 1)\nsolvers = all\n"
                       "snapshot_every = 0.5")
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    names = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    assert len(names) > 5
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    ma.pop(TIMESTAMP_KEY)
    mb.pop(TIMESTAMP_KEY)
    assert ma == mb


def test_manifest_key_order(tmp_path):
    res = run_scenario(parse_config(SUPER + "t_end = 1"), tmp_path)
    keys = list(json.loads((tmp_path / "manifest.json").read_text()))
    assert keys == list(res.manifest)
    assert keys[0] == "params" and keys[-1] == TIMESTAMP_KEY


@pytest.mark.parametrize("text", ["t_end = 1\nsolvers = ode"])
def test_out_dir_from_config(tmp_path, monkeypatch, text):
    monkeypatch.chdir(tmp_path)
    res = run_scenario(parse_config(SUPER + text + "\nout = results"))
    assert res.out_dir.name == "results" and (tmp_path / "results" / "manifest.json").exists()
