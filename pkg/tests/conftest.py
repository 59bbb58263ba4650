"""Shared scenario builders for the test suite.

Two reference setups are used throughout: a single pipe with slow sound
speed (so a handful of time steps covers interesting dynamics), and the
six-pipe tree with two entries, one inner junction chain and three exits.
"""

import math

import numpy as np
import pytest

from gasnet.network import classify_vertices, parse_network
from gasnet.scenario import scenario_from_dict
from gasnet.steady import steady_pressure_profile

SOUND_SPEED = 5.0


def single_pipe_doc(**overrides):
    doc = {
        "network": {
            "constants": {"c": SOUND_SPEED, "g": 9.81},
            "vertices": ["v1", "v2"],
            "pipes": [{
                "id": "e1", "from": "v1", "to": "v2",
                "length": 1.0, "diameter": 0.5,
                "friction": 0.04, "inclination": 0.0,
            }],
        },
        "steady": {"entry_pressure": {"v1": 2.0}, "entry_flux": {"v1": 0.4}},
        "state_box": {"e1": {"p": [1.0, 3.5], "q": [-0.6, 1.4]}},
        "grid": {"nodes_per_meter": 12},
        "horizon": 0.6,
        "time_steps": 48,
        "picard": {"tol": 1e-12},
    }
    doc.update(overrides)
    return doc


def tree_network_doc():
    def pipe(i, a, b, length, diameter, friction, inclination):
        return {"id": f"e{i}", "from": a, "to": b, "length": length,
                "diameter": diameter, "friction": friction,
                "inclination": inclination}

    return {
        "constants": {"c": SOUND_SPEED, "g": 9.81},
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


def tree_doc(**overrides):
    """Six-pipe tree with entry data consistent at the v4 junction.

    The second entry pressure is back-solved so that both entries meet the
    junction at the same pressure (pipe e3 is horizontal, so the closed-form
    profile inverts exactly).
    """
    net = tree_network_doc()
    topo = parse_network(net)
    p1, q1 = 2.0, 0.3
    pv2 = float(steady_pressure_profile(topo.pipes[0].params, p1, q1, 1.0))
    pv4 = float(steady_pressure_profile(topo.pipes[1].params, pv2, q1, 0.8))
    q3 = 0.25
    par3 = topo.pipes[2].params
    pin3 = math.sqrt(pv4 ** 2 + 2.0 * par3.beta * q3 * q3 * par3.length)
    doc = {
        "network": net,
        "steady": {
            "entry_pressure": {"v1": p1, "v3": pin3},
            "entry_flux": {"v1": q1, "v3": q3},
        },
        "state_box": {f"e{i}": {"p": [1.0, 3.2], "q": [-0.6, 1.5]}
                      for i in range(1, 7)},
        "grid": {"nodes_per_meter": 16},
        "horizon": 0.4,
        "time_steps": 60,
    }
    doc.update(overrides)
    return doc


@pytest.fixture(scope="session")
def single_pipe():
    return scenario_from_dict(single_pipe_doc())


@pytest.fixture(scope="session")
def tree():
    return scenario_from_dict(tree_doc())


@pytest.fixture(scope="session")
def tree_classification(tree):
    return classify_vertices(tree.topology)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
