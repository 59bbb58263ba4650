"""State constraints, penalty multipliers and the delta-homotopy.

The tracking target pushes the pipe pressure past the upper face of the
state box.  The optimizer handles the box through an escalating quadratic
penalty; the final penalty slope 2*rho*violation converges to the
constraint multiplier.  The delta-homotopy re-solves the problem on boxes
shrunk toward the equilibrium profile: delta = 1 reproduces the base run
bit for bit, smaller deltas tighten the active faces.

Run from the repository root:

    python3 demos/constrained_homotopy.py
"""

import numpy as np

from gasnet import CostConfig, delta_homotopy, kkt_residual, optimize, scenario_from_dict

DOC = {
    "network": {
        "constants": {"c": 5.0, "g": 9.81},
        "vertices": ["v1", "v2"],
        "pipes": [{"id": "e1", "from": "v1", "to": "v2", "length": 1.0,
                   "diameter": 0.5, "friction": 0.04, "inclination": 0.0}],
    },
    "steady": {"entry_pressure": {"v1": 2.0}, "entry_flux": {"v1": 0.4}},
    "state_box": {"e1": {"p": [1.0, 2.05], "q": [-0.3, 1.0]}},
    "grid": {"nodes_per_meter": 8},
    "horizon": 0.4,
    "time_steps": 32,
    "picard": {"tol": 1e-12},
    "safe_tube": False,
    "kappa_u": 0.2,
}


def main():
    sc = scenario_from_dict(DOC)
    problem = sc.problem
    target = sc.steady.v_e.copy()
    target[sc.grid.p_slice(0)] += 0.08   # above the 2.05 pressure face
    config = CostConfig(target_kind="constant", target_data=target, sigma=1e-3,
                        max_iters=1500, grad_tol=3e-6,
                        rho0=100.0, rho_factor=1000.0, rho_max=1e8,
                        feas_tol=1e-10)

    report = optimize(problem, config)
    print(f"base run: {report.status} in {report.iterations} iterations")
    for stage in report.rho_stages:
        print(f"  rho = {stage['rho']:.0e}: {stage['iterations']} iterations, "
              f"worst violation {stage['worst_violation']:.3e}")
    kkt = kkt_residual(problem, config, report, rng=np.random.default_rng(0))
    print(f"  KKT residual {kkt.residual:.3e}, complementarity "
          f"{kkt.complementarity:.3e}, max multiplier {kkt.multiplier_max:.3g}\n")

    for delta, sub, rep in delta_homotopy(problem, config, [1.0, 0.9]):
        if rep.final_signal is None:
            print(f"delta = {delta}: {rep.status}")
            continue
        line = f"delta = {delta}: {rep.status}, worst violation {rep.worst_violation:.3e}"
        if delta == 1.0:
            same = np.array_equal(problem.reduced(report.final_signal),
                                  sub.reduced(rep.final_signal))
            line += f", bit-identical to base run: {same}"
        else:
            kkt_d = kkt_residual(sub, config, rep, rng=np.random.default_rng(0))
            line += (f", KKT {kkt_d.residual:.3e}, complementarity "
                     f"{kkt_d.complementarity:.3e}")
        print(line)


if __name__ == "__main__":
    main()
