"""Scenario documents: parsing, problem assembly, CSV/JSON emission.

A scenario is a single YAML document that fully determines a run:
network, steady-state data, state box, grid and time resolution,
control, target, and optimizer settings.  All numeric output uses
shortest-roundtrip decimal serialization so reruns are diffable.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .controls import ControlSignal
from .discrete import Discretization, Grid, build_grid
from .errors import GasnetError, ScenarioError
from .forward import Trajectory
from .network import NetworkTopology, VertexClassification, classify_vertices, parse_network
from .optimize import ControlProblem, CostConfig
from .steady import StateBox, SteadyState, compute_steady_state

__all__ = [
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_diagnostics_csv",
    "write_control_csv",
    "read_control_csv",
    "write_summary",
]


def _fmt(x) -> str:
    v = float(x)
    if not np.isfinite(v):
        raise GasnetError("refusing to serialize a non-finite value")
    return repr(v)


@dataclass
class Scenario:
    raw: dict
    topology: NetworkTopology
    classification: VertexClassification
    grid: Grid
    disc: Discretization
    steady: SteadyState
    box: StateBox
    problem: ControlProblem
    cost_config: CostConfig
    control: ControlSignal
    homotopy_deltas: list

    @property
    def times(self):
        return self.problem.times


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as err:
        raise ScenarioError(f"cannot read scenario file: {err}") from None
    except yaml.YAMLError as err:
        raise ScenarioError(f"scenario is not valid YAML: {err}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _require(doc: dict, key: str):
    if key not in doc:
        raise ScenarioError(f"missing scenario key {key!r}")
    return doc[key]


def scenario_from_dict(doc: dict, base_dir: str = ".") -> Scenario:
    network_doc = doc.get("network")
    if network_doc is None and "network_file" in doc:
        with open(os.path.join(base_dir, doc["network_file"])) as fh:
            network_doc = yaml.safe_load(fh)
    if not isinstance(network_doc, dict):
        raise ScenarioError("missing scenario key 'network'")
    if "constants" in doc and "constants" not in network_doc:
        network_doc = dict(network_doc, constants=doc["constants"])
    topology = parse_network(network_doc)
    classification = classify_vertices(topology)

    grid_cfg = _require(doc, "grid")
    grid = build_grid(
        topology,
        nodes_per_meter=grid_cfg.get("nodes_per_meter"),
        per_pipe=grid_cfg.get("per_pipe"),
    )
    disc = Discretization(grid, topology, classification)

    steady_cfg = _require(doc, "steady")
    steady = compute_steady_state(
        topology, classification, grid,
        entry_pressure={str(k): float(v) for k, v in _require(steady_cfg, "entry_pressure").items()},
        entry_flux={str(k): float(v) for k, v in _require(steady_cfg, "entry_flux").items()},
        flux_pins=steady_cfg.get("flux_pins"),
    )

    box_cfg = doc.get("state_box")
    if box_cfg:
        p_bounds, q_bounds = [], []
        for pipe in topology.pipes:
            if pipe.pipe_id not in box_cfg:
                raise ScenarioError(f"state_box missing pipe {pipe.pipe_id!r}")
            entry = box_cfg[pipe.pipe_id]
            p_bounds.append([float(x) for x in entry["p"]])
            q_bounds.append([float(x) for x in entry["q"]])
        box = StateBox(np.array(p_bounds), np.array(q_bounds))
    else:
        # default wide box around the equilibrium
        p_lo = min(p.min() for p in steady.profiles)
        p_hi = max(p.max() for p in steady.profiles)
        span = max(np.max(np.abs(steady.q)), 1.0)
        box = StateBox(
            np.tile([0.5 * p_lo, p_hi + p_lo], (topology.m, 1)),
            np.stack([steady.q - span, steady.q + span], axis=1),
        )

    horizon = float(_require(doc, "horizon"))
    steps = int(_require(doc, "time_steps"))
    if steps < 1 or horizon <= 0.0:
        raise ScenarioError("horizon and time_steps must be positive")
    times = np.linspace(0.0, horizon, steps + 1)

    picard_cfg = doc.get("picard", {}) or {}
    problem = ControlProblem(
        disc, steady, box, times,
        eta=float(doc.get("eta", 1.0)),
        kappa=(float(doc["kappa_u"]) if doc.get("kappa_u") is not None else None),
        picard_tol=float(picard_cfg.get("tol", 1e-10)),
        picard_max_iters=int(picard_cfg.get("max_iters", 50)),
        enforce_rball=bool(doc.get("safe_tube", True)),
    )

    control = _control_from_config(doc.get("control"), problem, base_dir)
    cost_config = _cost_config_from_doc(doc, problem, base_dir)
    homotopy = doc.get("homotopy", {}) or {}
    deltas = [float(d) for d in homotopy.get("deltas", [])]

    return Scenario(raw=doc, topology=topology, classification=classification,
                    grid=grid, disc=disc, steady=steady, box=box, problem=problem,
                    cost_config=cost_config, control=control, homotopy_deltas=deltas)


def _control_from_config(cfg, problem: ControlProblem, base_dir: str) -> ControlSignal:
    phi_e = problem.phi_e
    if cfg is None or cfg == "equilibrium" or (isinstance(cfg, dict) and cfg.get("kind") == "equilibrium"):
        return phi_e.copy()
    if not isinstance(cfg, dict):
        raise ScenarioError("control must be 'equilibrium' or a mapping")
    if "file" in cfg:
        return read_control_csv(os.path.join(base_dir, cfg["file"]), problem.times,
                                phi_e.values.shape[1])
    if "modes" in cfg:
        t = problem.times
        T = t[-1]
        values = phi_e.values.copy()
        for mode in cfg["modes"]:
            slot = int(mode["slot"])
            if not problem.disc.active_slots[slot]:
                raise ScenarioError(f"control mode addresses inactive slot {slot}")
            amp = float(mode["amplitude"])
            cycles = float(mode.get("cycles", 0.0))
            bump = amp * np.sin(np.pi * t / T) ** 2
            if cycles:
                bump = bump * np.cos(2.0 * np.pi * cycles * t / T)
            values[:, slot] += bump
        red = problem.space.project_feasible(values - phi_e.values)
        return ControlSignal(problem.times, phi_e.values + red)
    raise ScenarioError("control mapping needs 'file' or 'modes'")


def _cost_config_from_doc(doc: dict, problem: ControlProblem, base_dir: str) -> CostConfig:
    target = doc.get("target", {"kind": "equilibrium"}) or {"kind": "equilibrium"}
    if isinstance(target, str):
        target = {"kind": target}
    kind = target.get("kind", "equilibrium")
    data = None
    if kind == "constant":
        v_d = problem.steady.v_e.copy()
        offsets = target.get("offsets", {})
        grid = problem.disc.grid
        for k, pipe in enumerate(problem.disc.topology.pipes):
            off = offsets.get(pipe.pipe_id, {})
            v_d[grid.p_slice(k)] += float(off.get("p", 0.0))
            v_d[grid.q_slice(k)] += float(off.get("q", 0.0))
        data = v_d
    elif kind == "trajectory":
        states = read_trajectory_csv(os.path.join(base_dir, target["file"]),
                                     problem.disc.grid, problem.disc.topology,
                                     problem.times)
        data = 0.5 * (states[:-1] + states[1:])
    elif kind != "equilibrium":
        raise ScenarioError(f"unknown target kind {kind!r}")

    opt = doc.get("optimizer", {}) or {}
    pen = doc.get("penalty", {}) or {}
    return CostConfig(
        target_kind=kind,
        target_data=data,
        sigma=float(doc.get("sigma", 1e-3)),
        max_iters=int(opt.get("max_iters", 200)),
        grad_tol=float(opt.get("tol", 1e-6)),
        armijo_c=float(opt.get("armijo_c", 1e-4)),
        rho0=float(pen.get("rho0", 1.0)),
        rho_factor=float(pen.get("factor", 10.0)),
        rho_max=float(pen.get("rho_max", 1e6)),
    )


# -- CSV / JSON emission ---------------------------------------------------

def write_trajectory_csv(path: str, grid: Grid, topology: NetworkTopology,
                         traj: Trajectory):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "pipe", "x", "p", "q"])
        for n, t in enumerate(traj.times):
            state = traj.states[n]
            for k, pipe in enumerate(topology.pipes):
                p = state[grid.p_slice(k)]
                q = state[grid.q_slice(k)]
                for i, x in enumerate(grid.pipes[k].x):
                    writer.writerow([_fmt(t), pipe.pipe_id, _fmt(x), _fmt(p[i]), _fmt(q[i])])


def read_trajectory_csv(path: str, grid: Grid, topology: NetworkTopology,
                        times) -> np.ndarray:
    index = {pipe.pipe_id: k for k, pipe in enumerate(topology.pipes)}
    by_time: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_time.setdefault(float(row["t"]), []).append(row)
    ts = sorted(by_time)
    if len(ts) != len(times) or not np.allclose(ts, times, rtol=0, atol=1e-12 * max(1.0, times[-1])):
        raise ScenarioError("trajectory file time grid does not match the scenario")
    states = np.zeros((len(ts), grid.ndof))
    for n, t in enumerate(ts):
        for row in by_time[t]:
            k = index[row["pipe"]]
            x = float(row["x"])
            i = int(round(x / grid.pipes[k].h))
            states[n, grid.p_index(k, i)] = float(row["p"])
            states[n, grid.q_index(k, i)] = float(row["q"])
    return states


def write_diagnostics_csv(path: str, scenario: Scenario, traj: Trajectory):
    from .forward import kirchhoff_residual, pressure_continuity_residual

    disc, grid, box = scenario.disc, scenario.grid, scenario.box
    lo, hi = box.lower_vec(grid), box.upper_vec(grid)
    delta = traj.deltas[-1] if traj.deltas else 0.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "picard_iters", "delta", "kirchhoff_max",
                         "continuity_max", "rball_dist", "box_margin"])
        for n, t in enumerate(traj.times):
            state = traj.states[n]
            kmax = max(map(abs, kirchhoff_residual(disc, state).values()), default=0.0)
            cmax = max(pressure_continuity_residual(disc, state).values(), default=0.0)
            rdist = float(np.max(np.abs(state - scenario.steady.v_e)))
            margin = float(min(np.min(state - lo), np.min(hi - state)))
            writer.writerow([_fmt(t), traj.iterations, _fmt(delta), _fmt(kmax),
                             _fmt(cmax), _fmt(rdist), _fmt(margin)])


def write_control_csv(path: str, signal: ControlSignal):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "slot", "value"])
        for n, t in enumerate(signal.times):
            for s in range(signal.values.shape[1]):
                writer.writerow([_fmt(t), s, _fmt(signal.values[n, s])])


def read_control_csv(path: str, times, nslots: int) -> ControlSignal:
    values = np.zeros((len(times), nslots))
    seen_times = set()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            n = int(round(t / (times[1] - times[0])))
            if n < 0 or n >= len(times) or abs(times[n] - t) > 1e-10 * max(1.0, times[-1]):
                raise ScenarioError(f"control sample at t = {t} is off the scenario time grid")
            seen_times.add(n)
            values[n, int(row["slot"])] = float(row["value"])
    if len(seen_times) != len(times):
        raise ScenarioError("control file does not cover the scenario time grid")
    return ControlSignal(np.asarray(times, dtype=float), values)


def write_summary(path: str, payload: dict):
    def scrub(obj):
        if isinstance(obj, dict):
            return {k: scrub(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [scrub(v) for v in obj]
        if isinstance(obj, (np.floating, float)):
            v = float(obj)
            if not np.isfinite(v):
                raise GasnetError("refusing to serialize a non-finite value")
            return v
        if isinstance(obj, (np.integer, int)):
            return int(obj)
        return obj

    with open(path, "w") as fh:
        json.dump(scrub(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
