"""Steady states and junction conditions on a six-pipe tree.

Shows how consistent entry data for a multi-entry tree is constructed: the
pressure at the second entry is back-solved from the closed-form steady
profile so that both entries meet the inner junction at a common pressure.
Then a perturbed transient run demonstrates that the Kirchhoff and
pressure-continuity conditions hold to solver precision at every time step.

Run from the repository root:

    python3 demos/tree_junctions.py
"""

import math

import numpy as np

from gasnet import classify_vertices, parse_network, scenario_from_dict
from gasnet.forward import kirchhoff_residual, pressure_continuity_residual
from gasnet.optimize import _random_reduced
from gasnet.steady import steady_pressure_profile


def pipe(i, a, b, length, diameter, friction, inclination):
    return {"id": f"e{i}", "from": a, "to": b, "length": length,
            "diameter": diameter, "friction": friction,
            "inclination": inclination}


NETWORK = {
    "constants": {"c": 5.0, "g": 9.81},
    "vertices": [f"v{i}" for i in range(1, 8)],
    "pipes": [
        pipe(1, "v1", "v2", 1.0, 0.5, 0.04, 0.01),
        pipe(2, "v2", "v4", 0.8, 0.5, 0.03, 0.0),
        pipe(3, "v3", "v4", 1.2, 0.4, 0.05, 0.0),
        pipe(4, "v4", "v5", 1.0, 0.45, 0.04, 0.01),
        pipe(5, "v4", "v6", 0.9, 0.35, 0.03, 0.0),
        pipe(6, "v5", "v7", 1.1, 0.45, 0.02, 0.005),
    ],
}


def main():
    topo = parse_network(NETWORK)
    cls = classify_vertices(topo)
    print("entries:", cls.entry, " inner:", cls.inner, " exits:", cls.exit)

    # back-solve the v3 entry pressure: propagate from v1 down to v4, then
    # invert the horizontal-pipe profile of e3 (gamma = 0 there)
    p1, q1 = 2.0, 0.3
    pv2 = float(steady_pressure_profile(topo.pipes[0].params, p1, q1, 1.0))
    pv4 = float(steady_pressure_profile(topo.pipes[1].params, pv2, q1, 0.8))
    q3 = 0.25
    par3 = topo.pipes[2].params
    pin3 = math.sqrt(pv4 ** 2 + 2.0 * par3.beta * q3 * q3 * par3.length)
    print(f"junction pressure p(v4) = {pv4:.12g}")
    print(f"back-solved entry pressure p(v3) = {pin3:.12g}\n")

    doc = {
        "network": NETWORK,
        "steady": {"entry_pressure": {"v1": p1, "v3": pin3},
                   "entry_flux": {"v1": q1, "v3": q3}},
        "state_box": {f"e{i}": {"p": [1.0, 3.2], "q": [-0.6, 1.5]}
                      for i in range(1, 7)},
        "grid": {"nodes_per_meter": 16},
        "horizon": 0.4,
        "time_steps": 60,
    }
    sc = scenario_from_dict(doc)
    print("equilibrium fluxes per pipe:", np.round(sc.steady.q, 6))

    problem = sc.problem
    red = _random_reduced(problem.space, np.random.default_rng(0),
                          amplitude=0.3 * problem.space.kappa)
    traj = problem.solve(problem.signal_from_reduced(red))
    kmax = cmax = 0.0
    for state in traj.states:
        kmax = max(kmax, max(abs(v) for v in
                             kirchhoff_residual(sc.disc, state).values()))
        cmax = max(cmax, max(pressure_continuity_residual(sc.disc, state).values()))
    print(f"transient run, {traj.steps} steps:")
    print(f"  max Kirchhoff residual      {kmax:.3e}")
    print(f"  max continuity residual     {cmax:.3e}")


if __name__ == "__main__":
    main()
