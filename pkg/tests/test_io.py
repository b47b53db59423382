import io
import json
from pathlib import Path

import numpy as np
import pytest

import gcncert as gc
from gcncert import fileio
import helpers

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_load_shipped_graph():
    graph = fileio.load_graph(str(FIXTURES / "two_node_loop.graph.json"))
    assert graph.num_nodes == 2 and graph.num_features == 4
    assert graph.adjacency[0, 1] == 1 and graph.adjacency[1, 0] == 1


def test_load_shipped_model_reproduces_scores():
    graph = fileio.load_graph(str(FIXTURES / "two_node_loop.graph.json"))
    model = fileio.load_model(str(FIXTURES / "two_node_loop.model.json"))
    scores = gc.predict(model, graph).scores
    assert np.allclose(scores[0], [1.5, 2.5])


def test_graph_round_trip(tmp_path, rng):
    graph, _, _ = helpers.raw_instance(rng)
    path = tmp_path / "g.json"
    fileio.save_graph(graph, str(path))
    loaded = fileio.load_graph(str(path))
    assert np.array_equal(loaded.adjacency, graph.adjacency)
    assert np.array_equal(loaded.features, graph.features)


def test_model_round_trip_is_bit_exact(tmp_path):
    model = gc.GcnModel((
        gc.GcnLayer(np.array([[1 / 3, 0.1 + 0.2], [-1e-17, 2.0]]), np.array([np.pi, -0.0])),
    ))
    path = tmp_path / "m.json"
    fileio.save_model(model, str(path))
    loaded = fileio.load_model(str(path))
    assert np.array_equal(loaded.layers[0].weight, model.layers[0].weight)
    assert np.array_equal(loaded.layers[0].bias, model.layers[0].bias)


def test_graph_empty_edges_is_isolated(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({
        "num_nodes": 3, "num_features": 1, "edges": [],
        "features": [[0], [1], [0]],
    }))
    graph = fileio.load_graph(str(path))
    assert graph.adjacency.sum() == 0


def _write(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_graph_rejects_unknown_key(tmp_path):
    doc = {"num_nodes": 1, "num_features": 1, "edges": [], "features": [[0]], "labels": [0]}
    with pytest.raises(gc.DataError, match="labels"):
        fileio.load_graph(_write(tmp_path, doc))


def test_graph_rejects_bad_feature_with_field_path(tmp_path):
    doc = {"num_nodes": 1, "num_features": 2, "edges": [], "features": [[0, 2]]}
    with pytest.raises(gc.DataError, match=r"features\[0\]\[1\]"):
        fileio.load_graph(_write(tmp_path, doc))


def test_graph_rejects_out_of_range_edge(tmp_path):
    doc = {"num_nodes": 2, "num_features": 1, "edges": [[0, 2]], "features": [[0], [1]]}
    with pytest.raises(gc.DataError, match=r"edges\[0\]"):
        fileio.load_graph(_write(tmp_path, doc))


def test_graph_edges_deduplicated_and_symmetrized(tmp_path):
    doc = {"num_nodes": 2, "num_features": 1, "edges": [[0, 1], [1, 0], [0, 1]],
           "features": [[0], [1]]}
    graph = fileio.load_graph(_write(tmp_path, doc))
    assert graph.adjacency.tolist() == [[0, 1], [1, 0]]


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "num_nodes": 1,\n  oops\n}')
    with pytest.raises(gc.DataError, match="line 3"):
        fileio.load_graph(str(path))


def test_missing_file_is_data_error():
    with pytest.raises(gc.DataError):
        fileio.load_graph("/nonexistent/graph.json")


def test_model_rejects_mismatched_chain(tmp_path):
    doc = {"layers": [
        {"weight": [[1.0, 2.0]], "bias": [0.0, 0.0]},
        {"weight": [[1.0]], "bias": [0.0]},
    ]}
    with pytest.raises(gc.DataError):
        fileio.load_model(_write(tmp_path, doc))


def test_model_rejects_ragged_weight(tmp_path):
    doc = {"layers": [{"weight": [[1.0, 2.0], [1.0]], "bias": [0.0, 0.0]}]}
    with pytest.raises(gc.DataError, match=r"weight\[1\]"):
        fileio.load_model(_write(tmp_path, doc))


def test_model_rejects_unknown_layer_key(tmp_path):
    doc = {"layers": [{"weight": [[1.0]], "bias": [0.0], "activation": "relu"}]}
    with pytest.raises(gc.DataError, match="activation"):
        fileio.load_model(_write(tmp_path, doc))


def test_single_layer_model_is_valid(tmp_path):
    doc = {"layers": [{"weight": [[0.5, -0.5]], "bias": [0.0, 0.1]}]}
    model = fileio.load_model(_write(tmp_path, doc))
    assert model.num_layers == 1 and model.num_labels == 2


def test_format_flips():
    assert fileio.format_flips(gc.FlipSet(((1, 2), (0, 3)))) == "0:3;1:2"
    assert fileio.format_flips(gc.EMPTY_FLIPSET) == ""


def test_certify_csv_layout(two_node):
    graph, model = two_node
    judgments = gc.certify_sound(model, graph, gc.PerturbationBudget(1, 1))
    buffer = io.StringIO()
    fileio.write_certify_csv(buffer, judgments, {})
    lines = buffer.getvalue().splitlines()
    assert lines[0] == "node,margin,certified,counterexample_flips"
    node, margin, certified, flips = lines[1].split(",")
    assert node == "0" and certified == "true" and flips == ""
    assert float(margin) == pytest.approx(0.5, abs=1e-9)


def test_sweep_csv_layout():
    sweep = gc.RobustnessSweep(1, (1, 2), np.array([0.5, 0.25]), np.array([1.0, 0.75]),
                               np.array([1.5, 2.5]))
    buffer = io.StringIO()
    fileio.write_sweep_csv(buffer, sweep)
    lines = buffer.getvalue().splitlines()
    assert lines[0] == "p_l,p_g,lower,upper,runtime_ms"
    assert lines[1] == "1,1,0.5,1.0,1.5"
    assert lines[2] == "1,2,0.25,0.75,2.5"


def test_collective_csv_layout():
    limits = gc.RobustLimitVector(np.array([2, 0]), np.array([False, True]), 5)
    buffer = io.StringIO()
    fileio.write_collective_csv(buffer, limits)
    assert buffer.getvalue() == "node,max_robust_limit,never_certified\n0,2,false\n1,0,true\n"
