import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsheaf.graph import DirectedGraph, Edge, EdgeKind
from dsheaf.linalg import max_abs
from dsheaf.sheaf import (
    DirectedCellularSheaf,
    MapClass,
    SheafConfig,
    coboundary,
    complex_incidence,
    degree_blocks,
    laplacian_blocks,
    laplacian_from_coboundary,
    magnetic_laplacian,
    normalize,
    normalized_laplacian,
    phase,
    sign_magnetic_laplacian,
    spectral_report,
    trivial_sheaf,
)
from dsheaf.verify import random_mixed_graph, random_sheaf

K2_DIRECTED = DirectedGraph(2, (Edge(0, 1, EdgeKind.DIRECTED),))
K2_UNDIRECTED = DirectedGraph(2, (Edge(0, 1, EdgeKind.UNDIRECTED),))
TRIANGLE = DirectedGraph(3, (Edge(0, 1, EdgeKind.UNDIRECTED), Edge(1, 2, EdgeKind.UNDIRECTED),
                             Edge(0, 2, EdgeKind.UNDIRECTED)))
PATH3 = DirectedGraph(3, (Edge(0, 1, EdgeKind.UNDIRECTED), Edge(1, 2, EdgeKind.UNDIRECTED)))


# --- phase ------------------------------------------------------------------


@pytest.mark.parametrize("q", [0.0, 0.1, 0.25, 0.5, 1.0, -0.3])
def test_phase_is_one_on_symmetric_entries(q):
    assert phase(q, 0, 0) == 1.0
    assert phase(q, 1, 1) == 1.0


def test_phase_zero_q():
    assert phase(0.0, 1, 0) == 1.0


def test_phase_quarter_turn_is_plus_i():
    # normative convention: exp(i 2 pi q (a_uv - a_vu)) at q = 1/4 gives +i
    assert phase(0.25, 1, 0) == pytest.approx(1j, abs=1e-15)
    assert phase(0.25, 0, 1) == pytest.approx(-1j, abs=1e-15)


@settings(deadline=None, max_examples=60)
@given(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
       st.integers(min_value=0, max_value=1), st.integers(min_value=0, max_value=1))
def test_phase_conjugate_symmetry_and_modulus(q, a_uv, a_vu):
    t = phase(q, a_uv, a_vu)
    assert abs(t * phase(q, a_vu, a_uv) - 1.0) <= 1e-14
    assert abs(abs(t) - 1.0) <= 1e-14


# --- sheaf construction -------------------------------------------------------


def test_trivial_sheaf_undirected_edge_maps():
    eff = trivial_sheaf(K2_UNDIRECTED, 0.25).effective_maps()
    assert eff[0, 0, 0, 0] == 1.0 and eff[0, 1, 0, 0] == 1.0


def test_trivial_sheaf_directed_edge_carries_phase():
    eff = trivial_sheaf(K2_DIRECTED, 0.25).effective_maps()
    assert eff[0, 0, 0, 0] == 1.0
    assert eff[0, 1, 0, 0] == pytest.approx(1j, abs=1e-15)


def test_trivial_sheaf_edgeless_graph():
    sheaf = trivial_sheaf(DirectedGraph(3, ()), 0.25)
    assert sheaf.base_maps.shape == (0, 2, 1, 1)
    assert max_abs(laplacian_blocks(sheaf).dense()) == 0.0


def test_sheaf_rejects_wrong_map_shape():
    with pytest.raises(ValueError, match="base_maps"):
        DirectedCellularSheaf(K2_DIRECTED, SheafConfig(d=2, q=0.0), np.ones((1, 2, 1, 1)))


# --- coboundary ----------------------------------------------------------------


def test_coboundary_undirected_trivial_row():
    delta = coboundary(trivial_sheaf(K2_UNDIRECTED, 0.7)).dense()
    assert np.array_equal(delta, [[1.0, -1.0]])


def test_coboundary_directed_trivial_row():
    delta = coboundary(trivial_sheaf(K2_DIRECTED, 0.25)).dense()
    assert delta[0, 0] == 1.0
    assert delta[0, 1] == pytest.approx(-1j, abs=1e-15)


def test_coboundary_matches_per_edge_formula():
    rng = np.random.default_rng(0)
    graph = random_mixed_graph(rng, max_n=12)
    sheaf = random_sheaf(rng, graph, d=2, q=0.3, map_class=MapClass.GENERAL)
    delta = coboundary(sheaf).dense()
    x = rng.normal(size=(graph.n * 2, 1)) + 1j * rng.normal(size=(graph.n * 2, 1))
    eff = sheaf.effective_maps()
    slots = graph.edge_slots()
    expected = np.zeros((graph.m * 2, 1), dtype=complex)
    for e in range(graph.m):
        a, b = slots[e]
        expected[2 * e:2 * e + 2] = (eff[e, 0] @ x[2 * a:2 * a + 2]
                                     - eff[e, 1] @ x[2 * b:2 * b + 2])
    assert max_abs(delta @ x - expected) <= 1e-13


# --- Laplacian assembly --------------------------------------------------------


def test_laplacian_undirected_k2():
    lap = laplacian_from_coboundary(coboundary(trivial_sheaf(K2_UNDIRECTED, 0.25)))
    assert np.array_equal(lap.dense(), [[1.0, -1.0], [-1.0, 1.0]])


def test_laplacian_directed_k2_quarter_phase():
    dense = laplacian_blocks(trivial_sheaf(K2_DIRECTED, 0.25)).dense()
    expected = np.array([[1.0, -1j], [1j, 1.0]])
    assert max_abs(dense - expected) <= 1e-15


def test_laplacian_triangle_is_degree_minus_adjacency():
    dense = laplacian_blocks(trivial_sheaf(TRIANGLE, 0.4)).dense()
    expected = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=float)
    assert np.array_equal(dense, expected)


def test_laplacian_blocks_conjugate_symmetry():
    rng = np.random.default_rng(1)
    for map_class in MapClass:
        graph = random_mixed_graph(rng, max_n=10)
        lap = laplacian_blocks(random_sheaf(rng, graph, d=3, q=0.15, map_class=map_class))
        for u in range(graph.n):
            for v in range(graph.n):
                assert max_abs(lap.block(u, v) - lap.block(v, u).conj().T) <= 1e-13


def test_assembly_paths_agree():
    rng = np.random.default_rng(2)
    for _ in range(5):
        graph = random_mixed_graph(rng, max_n=14)
        sheaf = random_sheaf(rng, graph, d=2, q=0.25, map_class=MapClass.GENERAL)
        direct = laplacian_blocks(sheaf).dense()
        composed = laplacian_from_coboundary(coboundary(sheaf)).dense()
        assert max_abs(direct - composed) <= 1e-12


# --- degree blocks and normalization --------------------------------------------


def test_degree_block_of_isolated_node_is_zero():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED),))
    assert max_abs(degree_blocks(trivial_sheaf(graph, 0.25))[2]) == 0.0


def test_degree_blocks_trivial_sheaf_count_incident_edges():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED), Edge(2, 1, EdgeKind.UNDIRECTED)))
    deg = degree_blocks(trivial_sheaf(graph, 0.25))
    assert np.allclose(deg[:, 0, 0], [1.0, 2.0, 1.0], atol=1e-15)


def test_degree_blocks_equal_laplacian_diagonal_exactly():
    rng = np.random.default_rng(3)
    graph = random_mixed_graph(rng, max_n=10)
    sheaf = random_sheaf(rng, graph, d=2, q=0.35, map_class=MapClass.GENERAL)
    lap = laplacian_blocks(sheaf)
    deg = degree_blocks(sheaf)
    for u in range(graph.n):
        assert np.array_equal(lap.block(u, u), deg[u])


def test_normalize_k2_trivial():
    lap = normalized_laplacian(trivial_sheaf(K2_UNDIRECTED, 0.1))
    assert np.allclose(lap.dense(), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-14)


def test_normalize_isolated_node_rows_are_zero():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED),))
    dense = normalized_laplacian(trivial_sheaf(graph, 0.25)).dense()
    assert max_abs(dense[2, :]) == 0.0 and max_abs(dense[:, 2]) == 0.0


def test_normalized_spectrum_capped_at_two():
    rng = np.random.default_rng(4)
    for map_class in MapClass:
        graph = random_mixed_graph(rng, max_n=12)
        sheaf = random_sheaf(rng, graph, d=2, q=0.25, map_class=map_class)
        report = spectral_report(normalized_laplacian(sheaf))
        assert report.max_eig <= 2.0 + 1e-9
        assert report.min_eig >= -1e-9


# --- oracle operators -------------------------------------------------------------


def test_magnetic_k2_undirected_any_q():
    for q in (0.0, 0.25, 0.8):
        assert np.allclose(magnetic_laplacian(K2_UNDIRECTED, q),
                           [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_magnetic_directed_edge_quarter():
    # D_s - A_s * phase evaluated by hand for one directed edge
    out = magnetic_laplacian(K2_DIRECTED, 0.25)
    expected = np.array([[0.5, -0.5j], [0.5j, 0.5]])
    assert max_abs(out - expected) <= 1e-15


def test_magnetic_zero_q_is_symmetrized_laplacian():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED), Edge(1, 2, EdgeKind.DIRECTED)))
    out = magnetic_laplacian(graph, 0.0)
    expected = np.array([[0.5, -0.5, 0.0], [-0.5, 1.0, -0.5], [0.0, -0.5, 0.5]])
    assert max_abs(out - expected) <= 1e-15


def test_magnetic_normalized_handles_isolated_nodes():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED),))
    out = magnetic_laplacian(graph, 0.25, normalized=True)
    assert np.isfinite(out).all()
    assert out[2, 2] == 1.0  # isolated node keeps the identity diagonal


def test_sign_magnetic_k2_undirected():
    assert np.allclose(sign_magnetic_laplacian(K2_UNDIRECTED),
                       [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_sign_magnetic_directed_entry():
    out = sign_magnetic_laplacian(K2_DIRECTED)
    assert out[0, 1] == pytest.approx(-0.5j, abs=1e-15)
    assert max_abs(out - magnetic_laplacian(K2_DIRECTED, 0.25)) <= 1e-13


def test_sign_magnetic_edgeless_graph_is_zero():
    assert max_abs(sign_magnetic_laplacian(DirectedGraph(2, ()))) == 0.0


def test_incidence_undirected_column():
    b = complex_incidence(K2_UNDIRECTED, 0.25)
    assert np.array_equal(b, [[1.0], [-1.0]])


def test_incidence_directed_column():
    b = complex_incidence(K2_DIRECTED, 0.25)
    assert b[0, 0] == 1.0
    # target endpoint carries -phase(q, A_vu, A_uv) = -conj(phase of the edge)
    assert b[1, 0] == pytest.approx(1j, abs=1e-15)


def test_incidence_factorization_random_graphs():
    rng = np.random.default_rng(5)
    for q in (0.0, 0.1, 0.25, 0.5, 1.0):
        graph = random_mixed_graph(rng, max_n=15)
        dense = laplacian_blocks(trivial_sheaf(graph, q)).dense()
        b = complex_incidence(graph, q)
        assert max_abs(dense - b @ b.conj().T) <= 1e-13


# --- spectral report ------------------------------------------------------------


def test_spectral_report_zero_matrix():
    report = spectral_report(laplacian_blocks(trivial_sheaf(DirectedGraph(2, ()), 0.25)))
    assert (report.hermiticity_defect, report.min_eig, report.max_eig) == (0.0, 0.0, 0.0)


def test_spectral_report_path_graph_spectrum():
    # characteristic polynomial of the path Laplacian gives {0, 1, 3}
    report = spectral_report(laplacian_blocks(trivial_sheaf(PATH3, 0.0)))
    lap = laplacian_blocks(trivial_sheaf(PATH3, 0.0)).dense()
    from dsheaf.linalg import herm_eigvals
    assert np.allclose(herm_eigvals(lap), [0.0, 1.0, 3.0], atol=1e-12)
    assert report.min_eig == pytest.approx(0.0, abs=1e-12)
    assert report.max_eig == pytest.approx(3.0, abs=1e-12)


def test_spectral_report_rejects_oversized_matrix():
    graph = DirectedGraph(3, (Edge(0, 1, EdgeKind.DIRECTED),))
    with pytest.raises(ValueError, match="cap"):
        spectral_report(laplacian_blocks(trivial_sheaf(graph, 0.25)), max_dense=2)
