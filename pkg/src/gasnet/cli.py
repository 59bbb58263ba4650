"""Command-line front end: simulate, optimize, verify."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import GasnetError
from .forward import kirchhoff_residual, pressure_continuity_residual
from .optimize import delta_homotopy, kkt_residual, optimize
from .scenario import (
    load_scenario,
    write_control_csv,
    write_diagnostics_csv,
    write_summary,
    write_trajectory_csv,
)
from .verify import run_battery

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasnet",
        description="Simulation and boundary optimal control of gas flow on tree pipeline networks.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    parser.add_argument("--threads", type=int, default=1, help="worker thread cap")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the forward solver")
    sim.add_argument("scenario")
    sim.add_argument("-o", "--output", required=True, help="output directory")

    opt = sub.add_parser("optimize", help="solve the tracking control problem")
    opt.add_argument("scenario")
    opt.add_argument("-o", "--output", required=True, help="output directory")

    ver = sub.add_parser("verify", help="run the property battery")
    ver.add_argument("scenario")
    return parser


def _emit_error(err: Exception, output_dir: str | None):
    doc = {"error": type(err).__name__, "message": str(err)}
    line = json.dumps(doc, sort_keys=True)
    if output_dir:
        try:
            os.makedirs(output_dir, exist_ok=True)
            with open(os.path.join(output_dir, "error.json"), "w") as fh:
                fh.write(line + "\n")
        except OSError:
            pass
    print(line, file=sys.stderr)


def _residual_summary(scenario, traj):
    kmax = cmax = 0.0
    for state in traj.states:
        res = kirchhoff_residual(scenario.disc, state)
        kmax = max([kmax] + [abs(v) for v in res.values()])
        res = pressure_continuity_residual(scenario.disc, state)
        cmax = max([cmax] + list(res.values()))
    return kmax, cmax


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    os.makedirs(args.output, exist_ok=True)
    traj = scenario.problem.solve(scenario.control, allow_truncation=True)
    write_trajectory_csv(os.path.join(args.output, "trajectory.csv"),
                         scenario.grid, scenario.topology, traj)
    write_diagnostics_csv(os.path.join(args.output, "diagnostics.csv"), scenario, traj)
    kmax, cmax = _residual_summary(scenario, traj)
    dev = float(np.max(np.abs(traj.states - scenario.steady.v_e[None, :])))
    summary = {
        "status": "truncated horizon" if traj.truncated else "ok",
        "achieved_horizon": traj.achieved_horizon,
        "requested_horizon": float(scenario.times[-1]),
        "picard_iterations": traj.iterations,
        "contraction_ratios": [float(d) for d in traj.deltas],
        "max_kirchhoff_residual": kmax,
        "max_continuity_residual": cmax,
        "max_deviation_from_equilibrium": dev,
    }
    write_summary(os.path.join(args.output, "summary.json"), summary)
    if not args.quiet:
        print(f"simulate: {summary['status']}, T = {traj.achieved_horizon}")
    return 0


def _report_payload(problem, config, report):
    payload = {
        "status": report.status,
        "iterations": report.iterations,
        "converged": report.converged,
        "cost_history": [float(j) for j in report.cost_history],
        "final_cost": float(report.cost_history[-1]) if report.cost_history
        else float(problem.cost(report.final_signal, config, report.final_trajectory)),
        "final_rho": report.final_rho,
        "feasible": report.feasible,
        "worst_violation": report.worst_violation,
        "rho_stages": report.rho_stages,
    }
    if report.kkt is not None:
        payload["kkt"] = {
            "residual": report.kkt.residual,
            "complementarity": report.kkt.complementarity,
            "multiplier_max": report.kkt.multiplier_max,
            "zeta": report.kkt.zeta,
        }
    return payload


def _cmd_optimize(args) -> int:
    scenario = load_scenario(args.scenario)
    os.makedirs(args.output, exist_ok=True)
    problem, config = scenario.problem, scenario.cost_config
    initial = problem.reduced(scenario.control)
    rng = np.random.default_rng(args.seed)

    report = optimize(problem, config, initial)
    report.kkt = kkt_residual(problem, config, report, rng=rng)

    with open(os.path.join(args.output, "iterations.csv"), "w") as fh:
        fh.write("iteration,cost,penalized_cost,grad_norm,step\n")
        for i, (j, pj, gn, st) in enumerate(zip(report.cost_history,
                                                report.penalized_history,
                                                report.grad_history,
                                                report.step_history), start=1):
            fh.write(f"{i},{j!r},{pj!r},{gn!r},{st!r}\n")
    write_control_csv(os.path.join(args.output, "control.csv"), report.final_signal)
    write_trajectory_csv(os.path.join(args.output, "trajectory.csv"),
                         scenario.grid, scenario.topology, report.final_trajectory)

    initial_cost = problem.cost(scenario.control, config)
    payload = _report_payload(problem, config, report)
    payload["initial_cost"] = float(initial_cost)

    if scenario.homotopy_deltas:
        runs = delta_homotopy(problem, config, scenario.homotopy_deltas, initial)
        payload["homotopy"] = []
        for delta, sub, rep in runs:
            entry = {"delta": delta, "status": rep.status}
            if rep.final_signal is not None:
                entry.update(_report_payload(sub, config, rep))
                rep.kkt = kkt_residual(sub, config, rep,
                                       rng=np.random.default_rng(args.seed))
                entry["kkt"] = {"residual": rep.kkt.residual,
                                "complementarity": rep.kkt.complementarity}
            payload["homotopy"].append(entry)

    write_summary(os.path.join(args.output, "summary.json"), payload)
    if not args.quiet:
        print(f"optimize: {report.status}, J = {payload['final_cost']:.6g} "
              f"(initial {initial_cost:.6g})")
    return 0


def _cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    results = run_battery(scenario, seed=args.seed)
    width = max(len(name) for name, _, _ in results)
    failed = []
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        if not args.quiet or not ok:
            print(f"{name:<{width}}  {status}  {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    output = getattr(args, "output", None)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "optimize":
            return _cmd_optimize(args)
        return _cmd_verify(args)
    except GasnetError as err:
        _emit_error(err, output)
        return 2


if __name__ == "__main__":
    sys.exit(main())
