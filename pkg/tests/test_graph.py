import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsheaf.graph import (
    Dataset,
    DirectedGraph,
    DsbmParams,
    Edge,
    EdgeKind,
    adjacency,
    degree_features,
    dsbm_communities,
    dsbm_generate,
    make_splits,
    uniform_dsbm_params,
)


def test_adjacency_directed_edge():
    g = DirectedGraph(2, (Edge(0, 1, EdgeKind.DIRECTED),))
    assert np.array_equal(adjacency(g), [[0, 1], [0, 0]])


def test_adjacency_undirected_edge():
    g = DirectedGraph(2, (Edge(0, 1, EdgeKind.UNDIRECTED),))
    assert np.array_equal(adjacency(g), [[0, 1], [1, 0]])


def test_adjacency_mixed():
    # enumerated by hand: directed (0,1) plus undirected {1,2}
    g = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED), Edge(1, 2, EdgeKind.UNDIRECTED)))
    assert np.array_equal(adjacency(g), [[0, 1, 0], [0, 0, 1], [0, 1, 0]])


def test_graph_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        DirectedGraph(2, (Edge(1, 1, EdgeKind.DIRECTED),))


def test_graph_rejects_duplicate_pair():
    with pytest.raises(ValueError, match="more than one edge"):
        DirectedGraph(2, (Edge(0, 1, EdgeKind.DIRECTED), Edge(0, 1, EdgeKind.UNDIRECTED)))


def test_graph_rejects_reciprocal_directed_pair():
    with pytest.raises(ValueError, match="more than one edge"):
        DirectedGraph(2, (Edge(0, 1, EdgeKind.DIRECTED), Edge(1, 0, EdgeKind.DIRECTED)))


def test_graph_rejects_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        DirectedGraph(2, (Edge(0, 2, EdgeKind.DIRECTED),))


def test_edge_slots_ordering():
    g = DirectedGraph(4, (Edge(3, 1, EdgeKind.DIRECTED), Edge(2, 0, EdgeKind.UNDIRECTED)))
    slots = g.edge_slots()
    assert slots.tolist() == [[3, 1], [0, 2]]


# --- DSBM ----------------------------------------------------------------


def test_dsbm_zero_alpha_gives_empty_graph():
    params = uniform_dsbm_params(20, 5, 0.0, 0.0, 0.2, seed=1)
    assert dsbm_generate(params).m == 0


def test_dsbm_forced_orientation():
    params = uniform_dsbm_params(10, 5, 1.0, 1.0, 1.0, seed=3)
    g = dsbm_generate(params)
    comm = dsbm_communities(10, 5)
    assert g.m == 45  # complete graph on 10 nodes
    for u, v, kind in g.edges:
        assert kind is EdgeKind.DIRECTED
        if comm[u] != comm[v]:
            assert comm[u] < comm[v]  # beta = 1 points low community -> high


def test_dsbm_edge_count_matches_binomial_expectation():
    # oracle: within-community pairs C*(n/C choose 2), cross pairs the rest
    n, c = 2500, 5
    a_in, a_out = 0.1, 0.08
    size = n // c
    within = c * size * (size - 1) // 2
    cross = n * (n - 1) // 2 - within
    expected = within * a_in + cross * a_out
    var_single = within * a_in * (1 - a_in) + cross * a_out * (1 - a_out)
    seeds = range(20)
    counts = [dsbm_generate(uniform_dsbm_params(n, c, a_in, a_out, 0.2, seed=s)).m
              for s in seeds]
    sigma_mean = np.sqrt(var_single / len(counts))
    assert abs(np.mean(counts) - expected) <= 3.0 * sigma_mean


def test_dsbm_never_produces_digons():
    g = dsbm_generate(uniform_dsbm_params(60, 3, 0.5, 0.5, 0.3, seed=7))
    pairs = {(min(u, v), max(u, v)) for u, v, _ in g.edges}
    assert len(pairs) == g.m


def test_dsbm_deterministic_in_seed():
    params = uniform_dsbm_params(40, 4, 0.3, 0.2, 0.2, seed=11)
    assert dsbm_generate(params).edges == dsbm_generate(params).edges


def test_dsbm_params_validation():
    with pytest.raises(ValueError, match="multiple"):
        DsbmParams(10, 3, np.eye(3), np.full((3, 3), 0.5))
    alpha = np.array([[0.1, 0.2], [0.3, 0.1]])
    with pytest.raises(ValueError, match="symmetric"):
        DsbmParams(10, 2, alpha, np.full((2, 2), 0.5))
    beta = np.array([[0.5, 0.4], [0.4, 0.5]])
    with pytest.raises(ValueError, match="beta"):
        DsbmParams(10, 2, np.full((2, 2), 0.1), beta)


# --- degree features ------------------------------------------------------


def test_degree_features_isolated_node():
    g = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED),))
    assert degree_features(g)[2, 0] == 0.0


def test_degree_features_path():
    # counted by hand on 0 -> 1 -> 2
    g = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED), Edge(1, 2, EdgeKind.DIRECTED)))
    assert degree_features(g).ravel().tolist() == [1.0, 2.0, 1.0]


def test_degree_features_undirected_counts_both_ways():
    g = DirectedGraph(2, (Edge(0, 1, EdgeKind.UNDIRECTED),))
    assert degree_features(g).ravel().tolist() == [2.0, 2.0]


def test_degree_features_edge_order_invariant():
    edges = (Edge(0, 1, EdgeKind.DIRECTED), Edge(2, 1, EdgeKind.UNDIRECTED),
             Edge(3, 0, EdgeKind.DIRECTED), Edge(2, 4, EdgeKind.DIRECTED))
    base = degree_features(DirectedGraph(5, edges))
    flipped = degree_features(DirectedGraph(5, edges[::-1]))
    assert np.array_equal(base, flipped)


# --- splits ---------------------------------------------------------------


def test_splits_exact_division():
    labels = np.zeros(10, dtype=int)
    train, val, test = make_splits(labels, (0.8, 0.1, 0.1), per_class=True, seed=0)
    assert (train.sum(), val.sum(), test.sum()) == (8, 1, 1)


def test_splits_floor_and_remainder_rule():
    # floor rule on a 25-node class: 12 / 8 / 5
    labels = np.zeros(25, dtype=int)
    train, val, test = make_splits(labels, (0.48, 0.32, 0.20), per_class=True, seed=0)
    assert (train.sum(), val.sum(), test.sum()) == (12, 8, 5)
    # remainder of one goes to train: floors on 11 nodes are 8/1/1
    labels = np.zeros(11, dtype=int)
    train, val, test = make_splits(labels, (0.8, 0.1, 0.1), per_class=True, seed=0)
    assert (train.sum(), val.sum(), test.sum()) == (9, 1, 1)


def test_splits_deterministic():
    labels = np.repeat([0, 1, 2], 20)
    first = make_splits(labels, (0.48, 0.32, 0.20), per_class=True, seed=5)
    second = make_splits(labels, (0.48, 0.32, 0.20), per_class=True, seed=5)
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


@settings(deadline=None, max_examples=25)
@given(st.lists(st.integers(min_value=0, max_value=3), min_size=12, max_size=60),
       st.integers(min_value=0, max_value=2 ** 31))
def test_splits_disjoint_and_complete(raw_labels, seed):
    labels = np.asarray(raw_labels + [0, 1, 2, 3] * 3)  # every class has >= 3 members
    train, val, test = make_splits(labels, (0.48, 0.32, 0.20), per_class=True, seed=seed)
    combined = train.astype(int) + val.astype(int) + test.astype(int)
    assert np.array_equal(combined, np.ones_like(combined))


def test_splits_rejects_small_class():
    labels = np.array([0, 0, 0, 1, 1])
    with pytest.raises(ValueError, match="cannot be split"):
        make_splits(labels, (0.5, 0.25, 0.25), per_class=True, seed=0)


def test_splits_rejects_bad_fractions():
    with pytest.raises(ValueError, match="sum to 1"):
        make_splits(np.zeros(10, dtype=int), (0.5, 0.2, 0.2), seed=0)


def test_splits_whole_graph_mode():
    labels = np.array([0, 1])  # classes of size < 3 are fine without stratification
    train, val, test = make_splits(labels, (0.5, 0.5, 0.0), per_class=False, seed=0)
    assert train.sum() == 1 and val.sum() == 1 and test.sum() == 0


# --- Dataset --------------------------------------------------------------


def _toy_dataset(train, val, test):
    g = DirectedGraph(4, (Edge(0, 1, EdgeKind.DIRECTED),))
    return Dataset(g, np.zeros((4, 2)), np.array([0, 1, 0, 1]),
                   np.asarray(train), np.asarray(val), np.asarray(test))


def test_dataset_rejects_overlapping_masks():
    with pytest.raises(ValueError, match="disjoint"):
        _toy_dataset([1, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 1])


def test_dataset_requires_all_classes_in_train():
    with pytest.raises(ValueError, match="every class"):
        _toy_dataset([1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1])


def test_dataset_num_classes():
    ds = _toy_dataset([1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1])
    assert ds.num_classes == 2 and ds.input_dim == 2
