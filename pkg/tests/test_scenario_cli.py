"""Scenario files, CSV round trips and the command-line interface."""

import json
import os

import numpy as np
import pytest
import yaml

from gasnet.cli import main
from gasnet.errors import GasnetError
from gasnet.scenario import (
    load_scenario,
    read_control_csv,
    read_trajectory_csv,
    scenario_from_dict,
    write_control_csv,
    write_summary,
    write_trajectory_csv,
)
from gasnet.verify import run_battery

from conftest import single_pipe_doc


def _quick_doc(**overrides):
    return single_pipe_doc(grid={"nodes_per_meter": 8}, horizon=0.3,
                           time_steps=24, **overrides)


def _write_scenario(path, doc):
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh)
    return str(path)


def test_load_scenario_roundtrip(tmp_path):
    path = _write_scenario(tmp_path / "s.yaml", _quick_doc())
    sc = load_scenario(path)
    assert sc.topology.m == 1
    assert sc.problem.space.kappa > 0.0
    assert len(sc.times) == 25


def test_network_file_reference(tmp_path):
    doc = _quick_doc()
    net = doc.pop("network")
    with open(tmp_path / "net.yaml", "w") as fh:
        yaml.safe_dump(net, fh)
    doc["network_file"] = "net.yaml"
    path = _write_scenario(tmp_path / "s.yaml", doc)
    sc = load_scenario(path)
    assert sc.topology.m == 1


def test_missing_required_key_raises(tmp_path):
    doc = _quick_doc()
    del doc["steady"]
    path = _write_scenario(tmp_path / "s.yaml", doc)
    with pytest.raises(GasnetError):
        load_scenario(path)


def test_trajectory_csv_roundtrip(tmp_path, single_pipe):
    traj = single_pipe.problem.solve(single_pipe.problem.phi_e)
    path = str(tmp_path / "traj.csv")
    write_trajectory_csv(path, single_pipe.grid, single_pipe.topology, traj)
    states = read_trajectory_csv(path, single_pipe.grid, single_pipe.topology,
                                 traj.times)
    assert np.array_equal(states, traj.states)


def test_control_csv_roundtrip(tmp_path, single_pipe):
    signal = single_pipe.problem.phi_e
    path = str(tmp_path / "control.csv")
    write_control_csv(path, signal)
    back = read_control_csv(path, signal.times, signal.values.shape[1])
    assert np.array_equal(back.values, signal.values)


def test_summary_refuses_non_finite(tmp_path):
    with pytest.raises(GasnetError):
        write_summary(str(tmp_path / "bad.json"), {"value": float("nan")})


def test_cli_simulate_writes_artifacts(tmp_path):
    path = _write_scenario(tmp_path / "s.yaml", _quick_doc())
    out = str(tmp_path / "out")
    assert main(["--quiet", "simulate", path, "-o", out]) == 0
    for name in ("trajectory.csv", "diagnostics.csv", "summary.json"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "summary.json")) as fh:
        summary = json.load(fh)
    assert summary["status"] == "ok"
    assert summary["max_kirchhoff_residual"] < 1e-10


def test_cli_simulate_is_deterministic(tmp_path):
    doc = _quick_doc(control={"modes": [{"slot": 0, "amplitude": 0.3,
                                         "cycles": 1.0}]})
    path = _write_scenario(tmp_path / "s.yaml", doc)
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        assert main(["--quiet", "simulate", path, "-o", out]) == 0
        outs.append(out)
    for name in ("trajectory.csv", "diagnostics.csv", "summary.json"):
        with open(os.path.join(outs[0], name), "rb") as fa, \
                open(os.path.join(outs[1], name), "rb") as fb:
            assert fa.read() == fb.read()


def test_cli_optimize_writes_artifacts(tmp_path):
    doc = _quick_doc(
        target={"kind": "constant", "offsets": {"e1": {"p": 0.01}}},
        sigma=1e-6,
        optimizer={"max_iters": 15, "tol": 1e-9},
        penalty={"rho0": 0.0},
    )
    path = _write_scenario(tmp_path / "s.yaml", doc)
    out = str(tmp_path / "out")
    assert main(["--quiet", "optimize", path, "-o", out]) == 0
    for name in ("iterations.csv", "control.csv", "trajectory.csv", "summary.json"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "summary.json")) as fh:
        summary = json.load(fh)
    assert summary["final_cost"] <= summary["initial_cost"]
    assert "kkt" in summary


def test_cli_malformed_scenario_fails_cleanly(tmp_path):
    doc = _quick_doc()
    doc["network"]["pipes"][0]["length"] = -1.0
    path = _write_scenario(tmp_path / "s.yaml", doc)
    out = str(tmp_path / "out")
    assert main(["--quiet", "simulate", path, "-o", out]) == 2
    with open(os.path.join(out, "error.json")) as fh:
        err = json.load(fh)
    assert "message" in err and "error" in err


def test_cli_verify_passes_on_sound_scenario(tmp_path, capsys):
    path = _write_scenario(tmp_path / "s.yaml", _quick_doc())
    assert main(["verify", path]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 9
    assert all("PASS" in line for line in lines)


def test_battery_negative_control_detects_corruption():
    sc = scenario_from_dict(_quick_doc())
    results = run_battery(sc, seed=0, corrupt="skew")
    failed = [name for name, ok, _ in results if not ok]
    assert "skew_adjointness" in failed
