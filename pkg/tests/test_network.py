"""Network parsing, tree validation and vertex classification."""

import math

import pytest

from gasnet.network import (
    Constants,
    NetworkError,
    PipeParameters,
    classify_vertices,
    parse_network,
    validate_tree,
)

from conftest import tree_network_doc


def test_parse_tree_network():
    topo = parse_network(tree_network_doc())
    assert topo.m == 6
    assert topo.n == 7
    assert topo.pipe_index("e3") == 2
    val = validate_tree(topo)
    assert val.valid
    assert val.describe() == "valid tree"


def test_pipe_parameters_derived_coefficients():
    params = PipeParameters(length=2.0, diameter=0.5, friction=0.04,
                            inclination=0.01,
                            constants=Constants(c=340.0, g=9.81))
    assert params.beta == pytest.approx(0.04 / (2 * 0.5))
    assert params.gamma == pytest.approx(9.81 * math.sin(0.01) / 340.0 ** 2)


@pytest.mark.parametrize("field,value", [
    ("length", 0.0),
    ("diameter", -1.0),
    ("friction", -0.1),
    ("inclination", 2.0),
])
def test_pipe_parameter_validation(field, value):
    kwargs = dict(length=1.0, diameter=0.5, friction=0.04, inclination=0.0)
    kwargs[field] = value
    with pytest.raises(NetworkError):
        PipeParameters(**kwargs)


def test_classification_of_tree():
    topo = parse_network(tree_network_doc())
    cls = classify_vertices(topo)
    assert set(cls.entry) == {"v1", "v3"}
    assert set(cls.exit) == {"v6", "v7"}
    assert set(cls.inner) == {"v2", "v4", "v5"}
    # each column of xi has exactly one -1 (start) and one +1 (end)
    for k in range(topo.m):
        col = [cls.xi[v][k] for v in topo.vertices]
        assert sorted(col) == [-1] + [0] * (topo.n - 2) + [1]


def test_cycle_is_detected():
    doc = tree_network_doc()
    doc["pipes"].append({"id": "e7", "from": "v6", "to": "v7",
                         "length": 1.0, "diameter": 0.4,
                         "friction": 0.03, "inclination": 0.0})
    topo = parse_network(doc)
    val = validate_tree(topo)
    assert not val.acyclic
    assert val.witness_edges
    with pytest.raises(NetworkError, match="not a tree"):
        classify_vertices(topo)


def test_disconnected_graph_is_detected():
    doc = tree_network_doc()
    doc["vertices"].append("v8")
    topo = parse_network(doc)
    assert not validate_tree(topo).connected
    with pytest.raises(NetworkError, match="not a tree"):
        classify_vertices(topo)


def test_self_loop_is_rejected():
    doc = tree_network_doc()
    doc["pipes"][0]["to"] = "v1"
    with pytest.raises(NetworkError, match="self-loop"):
        parse_network(doc)


def test_duplicate_pipe_id_is_rejected():
    doc = tree_network_doc()
    doc["pipes"][1]["id"] = "e1"
    with pytest.raises(NetworkError, match="duplicate"):
        parse_network(doc)


def test_unknown_vertex_is_rejected():
    doc = tree_network_doc()
    doc["pipes"][0]["from"] = "nowhere"
    with pytest.raises(NetworkError, match="unknown vertex"):
        parse_network(doc)


def test_missing_pipe_field_is_rejected():
    doc = tree_network_doc()
    del doc["pipes"][0]["diameter"]
    with pytest.raises(NetworkError, match="missing field"):
        parse_network(doc)
