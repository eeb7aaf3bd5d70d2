import logging

import numpy as np
import pytest

from dsheaf.datasets import (
    load_edge_list,
    load_features,
    load_labels,
    save_edge_list,
    save_features,
    save_labels,
)
from dsheaf.graph import DirectedGraph, Edge, EdgeKind


def test_load_minimal_directed_edge(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("2\n0 1 1\n")
    g = load_edge_list(path)
    assert g.n == 2
    assert g.edges == (Edge(0, 1, EdgeKind.DIRECTED),)


def test_load_merges_reciprocal_pair(tmp_path, caplog):
    path = tmp_path / "g.txt"
    path.write_text("2\n0 1 1\n1 0 1\n")
    with caplog.at_level(logging.WARNING):
        g = load_edge_list(path)
    assert g.edges == (Edge(0, 1, EdgeKind.UNDIRECTED),)
    assert any("merged" in rec.message for rec in caplog.records)


def test_round_trip_is_byte_identical(tmp_path):
    original = tmp_path / "g.txt"
    original.write_text("4\n0 1 1\n2 1 0\n3 0 1\n")
    copy = tmp_path / "copy.txt"
    save_edge_list(load_edge_list(original), copy)
    assert copy.read_bytes() == original.read_bytes()


def test_save_then_load_preserves_graph(tmp_path):
    g = DirectedGraph(5, (Edge(0, 4, EdgeKind.DIRECTED), Edge(1, 2, EdgeKind.UNDIRECTED)))
    path = tmp_path / "g.txt"
    save_edge_list(g, path)
    loaded = load_edge_list(path)
    assert loaded.n == g.n and loaded.edges == g.edges


def test_comments_and_blank_lines_ignored(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# header comment\n\n3\n# edge below\n0 2 0\n")
    g = load_edge_list(path)
    assert g.edges == (Edge(0, 2, EdgeKind.UNDIRECTED),)


@pytest.mark.parametrize("body, message", [
    ("2\n0 1\n", "expected 'u v k'"),
    ("2\n0 1 7\n", "kind must be 0 or 1"),
    ("2\n0 2 1\n", "out of range"),
    ("2\n0 x 1\n", "non-integer"),
    ("2\n1 1 1\n", "self-loop"),
    ("2\n0 1 1\n0 1 0\n", "duplicate edge"),
    ("2\n0 1 0\n1 0 1\n", "duplicate edge"),
    ("x\n", "header"),
    ("", "header"),
])
def test_malformed_edge_lists_raise(tmp_path, body, message):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(ValueError, match=message):
        load_edge_list(path)


def test_features_round_trip(tmp_path):
    path = tmp_path / "x.csv"
    values = np.array([[1.5, -2.25], [0.1, 3.0], [4.0, 5.5]])
    save_features(values, path)
    assert np.array_equal(load_features(path, expected_rows=3), values)


def test_features_row_count_mismatch(tmp_path):
    path = tmp_path / "x.csv"
    save_features(np.zeros((2, 2)), path)
    with pytest.raises(ValueError, match="row count"):
        load_features(path, expected_rows=3)


def test_features_ragged_rows_raise(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ValueError, match="columns"):
        load_features(path)


def test_labels_round_trip(tmp_path):
    path = tmp_path / "y.txt"
    save_labels([0, 2, 1, 2], path)
    assert load_labels(path, expected_rows=4).tolist() == [0, 2, 1, 2]


def test_labels_reject_non_integer(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("0\n1.5\n")
    with pytest.raises(ValueError, match="integer"):
        load_labels(path)


def test_adjacency_of_loaded_graph_matches_edge_list(tmp_path):
    from dsheaf.graph import adjacency

    path = tmp_path / "g.txt"
    path.write_text("4\n0 1 1\n2 3 0\n3 0 1\n")
    a = adjacency(load_edge_list(path))
    expected = np.zeros((4, 4))
    expected[0, 1] = 1
    expected[2, 3] = expected[3, 2] = 1
    expected[3, 0] = 1
    assert np.array_equal(a, expected)
