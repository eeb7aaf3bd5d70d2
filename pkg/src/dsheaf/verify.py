"""Randomized verification suites for the Laplacian operator properties.

Each suite draws seeded random graphs and sheaves, measures a worst-case
defect against an independent oracle (classical real assembly, phase-free
replay, symmetrized-graph Laplacians, incidence factorization, or the
eigensolver), and passes iff the defect stays under the stated bound.  The
same suites back both the command-line ``verify`` command and the acceptance
tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import DirectedGraph, Edge, EdgeKind
from .linalg import herm_eigvals, hermiticity_defect, max_abs
from .sheaf import (
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
    phase,
    sign_magnetic_laplacian,
    trivial_sheaf,
)

Q_GRID = (0.0, 0.1, 0.25, 0.5, 1.0)
MAP_CLASSES = (MapClass.DIAGONAL, MapClass.ORTHOGONAL, MapClass.GENERAL)
D_GRID = (1, 2, 3, 4)


# --- random instances ----------------------------------------------------


def random_mixed_graph(rng: np.random.Generator, max_n: int = 50,
                       directed_only: bool = False, undirected_only: bool = False,
                       isolate_one: bool = False) -> DirectedGraph:
    """Erdos-Renyi style mixed graph; optionally keep node 0 isolated."""
    n = int(rng.integers(2, max_n + 1))
    p = float(rng.uniform(0.05, 0.35))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if isolate_one and (u == 0 or v == 0):
                continue
            if rng.random() >= p:
                continue
            if undirected_only:
                kind = EdgeKind.UNDIRECTED
            elif directed_only:
                kind = EdgeKind.DIRECTED
            else:
                kind = EdgeKind.DIRECTED if rng.random() < 2.0 / 3.0 else EdgeKind.UNDIRECTED
            if kind is EdgeKind.DIRECTED and rng.random() < 0.5:
                u_, v_ = v, u
            else:
                u_, v_ = u, v
            edges.append(Edge(u_, v_, kind))
    return DirectedGraph(n, tuple(edges))


def random_base_maps(rng: np.random.Generator, m: int, d: int,
                     map_class: MapClass) -> np.ndarray:
    """Random real base maps of the requested structure, shape (m, 2, d, d)."""
    if map_class is MapClass.DIAGONAL:
        out = np.zeros((m, 2, d, d))
        idx = np.arange(d)
        out[..., idx, idx] = rng.uniform(-1.5, 1.5, size=(m, 2, d))
        return out
    if map_class is MapClass.ORTHOGONAL:
        iu, ju = np.triu_indices(d, k=1)
        skew = np.zeros((m, 2, d, d))
        vals = rng.uniform(-1.0, 1.0, size=(m, 2, iu.size))
        skew[..., iu, ju] = vals
        skew[..., ju, iu] = -vals
        eye = np.eye(d)
        return (eye - skew) @ np.linalg.inv(eye + skew)
    return rng.uniform(-1.0, 1.0, size=(m, 2, d, d))


def random_sheaf(rng: np.random.Generator, graph: DirectedGraph, d: int, q: float,
                 map_class: MapClass) -> DirectedCellularSheaf:
    config = SheafConfig(d=d, q=q, map_class=map_class)
    return DirectedCellularSheaf(graph, config, random_base_maps(rng, graph.m, d, map_class))


# --- independent oracles --------------------------------------------------


def classical_sheaf_laplacian(graph: DirectedGraph, base_maps: np.ndarray) -> np.ndarray:
    """Real sheaf Laplacian of the undirected view, built by its own route.

    Ignores edge direction and phases entirely: assembles the real coboundary
    (+F at the first slot's node, -F at the second's) and returns delta^T
    delta as a dense real matrix.
    """
    d = base_maps.shape[-1]
    slots = graph.edge_slots()
    delta = np.zeros((graph.m * d, graph.n * d))
    for e in range(graph.m):
        a, b = int(slots[e, 0]), int(slots[e, 1])
        delta[e * d:(e + 1) * d, a * d:(a + 1) * d] = base_maps[e, 0]
        delta[e * d:(e + 1) * d, b * d:(b + 1) * d] = -base_maps[e, 1]
    return delta.T @ delta


def classical_graph_laplacian(graph: DirectedGraph) -> np.ndarray:
    """D - A of the undirected unweighted view (integer entries)."""
    a = np.zeros((graph.n, graph.n))
    for u, v, _ in graph.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return np.diag(a.sum(axis=1)) - a


# --- corpus ----------------------------------------------------------------


@dataclass
class CorpusItem:
    """One random sheaf with lazily cached operators and spectra."""

    sheaf: DirectedCellularSheaf
    _cache: dict = None

    def __post_init__(self):
        self._cache = {}

    def _get(self, key: str, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def lap(self):
        return self._get("lap", lambda: laplacian_blocks(self.sheaf))

    @property
    def lap_dense(self) -> np.ndarray:
        return self._get("lap_dense", lambda: self.lap.dense())

    @property
    def lap_norm(self):
        return self._get("lap_norm",
                         lambda: normalize(self.lap, degree_blocks(self.sheaf)))

    @property
    def lap_norm_dense(self) -> np.ndarray:
        return self._get("lap_norm_dense", lambda: self.lap_norm.dense())

    @property
    def eigs(self) -> np.ndarray:
        return self._get("eigs", lambda: herm_eigvals(self._hermitized(self.lap_dense)))

    @property
    def eigs_norm(self) -> np.ndarray:
        return self._get("eigs_norm",
                         lambda: herm_eigvals(self._hermitized(self.lap_norm_dense)))

    @staticmethod
    def _hermitized(a: np.ndarray) -> np.ndarray:
        return 0.5 * (a + np.conj(a.T))


def build_corpus(seed: int, trials: int, max_n: int = 50) -> list[CorpusItem]:
    """Random mixed-graph sheaves cycling d, q, and map class; every fifth
    instance keeps node 0 isolated to exercise the pseudo-inverse path."""
    rng = np.random.default_rng(seed)
    items = []
    for k in range(trials):
        graph = random_mixed_graph(rng, max_n=max_n, isolate_one=(k % 5 == 4))
        d = D_GRID[k % len(D_GRID)]
        q = Q_GRID[k % len(Q_GRID)]
        map_class = MAP_CLASSES[k % len(MAP_CLASSES)]
        items.append(CorpusItem(random_sheaf(rng, graph, d, q, map_class)))
    return items


# --- suites ----------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    trials: int
    worst: float
    bound: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.worst <= self.bound

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  [{self.detail}]" if self.detail else ""
        return (f"{self.name:<38s} {self.trials:4d} trials   worst {self.worst:9.3e}"
                f"   bound {self.bound:.1e}   {status}{extra}")


def suite_hermiticity(corpus: list[CorpusItem]) -> SuiteResult:
    worst = 0.0
    for item in corpus:
        worst = max(worst, hermiticity_defect(item.lap_dense),
                    hermiticity_defect(item.lap_norm_dense))
    return SuiteResult("theorem 1: hermiticity (L, L_N)", len(corpus), worst, 1e-12)


def suite_psd(corpus: list[CorpusItem]) -> SuiteResult:
    worst = 0.0
    for item in corpus:
        if item.eigs.size == 0:
            continue
        top = max(float(item.eigs[-1]), 1.0)
        worst = max(worst, -float(item.eigs[0]) / top, -float(item.eigs_norm[0]))
    return SuiteResult("theorem 1: positive semidefiniteness", len(corpus), worst, 1e-9)


def suite_spectral_cap(corpus: list[CorpusItem]) -> SuiteResult:
    worst = 0.0
    for item in corpus:
        if item.eigs_norm.size:
            worst = max(worst, float(item.eigs_norm[-1]) - 2.0)
    return SuiteResult("theorem 2: normalized spectrum <= 2", len(corpus), worst, 1e-9)


def suite_assembly(corpus: list[CorpusItem]) -> SuiteResult:
    worst = 0.0
    for item in corpus:
        delta = coboundary(item.sheaf).dense()
        worst = max(worst, max_abs(item.lap_dense - np.conj(delta.T) @ delta))
    return SuiteResult("assembly: block formulas vs coboundary", len(corpus), worst, 1e-12)


def suite_orientation(corpus: list[CorpusItem]) -> SuiteResult:
    """Flipping the undirected-edge orientation sign leaves the Laplacian put."""
    worst = 0.0
    for item in corpus:
        graph = item.sheaf.graph
        delta = coboundary(item.sheaf).dense()
        d = item.sheaf.d
        flipped = delta.copy()
        for e, edge in enumerate(graph.edges):
            if edge.kind is EdgeKind.UNDIRECTED:
                flipped[e * d:(e + 1) * d, :] *= -1.0
        worst = max(worst, max_abs(np.conj(delta.T) @ delta - np.conj(flipped.T) @ flipped))
    return SuiteResult("assembly: orientation independence", len(corpus), worst, 1e-13)


def suite_generalization(seed: int, trials: int, max_n: int = 50) -> SuiteResult:
    """Undirected graphs: real entries and the classical sheaf Laplacian for
    every q; trivial sheaf gives exactly D - A; q = 0 on directed graphs gives
    the classical sheaf Laplacian of the undirected view."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        q = Q_GRID[k % len(Q_GRID)]
        d = D_GRID[k % len(D_GRID)]
        map_class = MAP_CLASSES[k % len(MAP_CLASSES)]

        undirected = random_mixed_graph(rng, max_n=max_n, undirected_only=True)
        sheaf = random_sheaf(rng, undirected, d, q, map_class)
        dense = laplacian_blocks(sheaf).dense()
        worst = max(worst, max_abs(dense.imag))
        worst = max(worst, max_abs(dense - classical_sheaf_laplacian(undirected, sheaf.base_maps)))
        worst = max(worst, max_abs(laplacian_blocks(trivial_sheaf(undirected, q)).dense()
                                   - classical_graph_laplacian(undirected)))

        directed = random_mixed_graph(rng, max_n=max_n)
        sheaf0 = random_sheaf(rng, directed, d, 0.0, map_class)
        dense0 = laplacian_blocks(sheaf0).dense()
        worst = max(worst, max_abs(dense0 - classical_sheaf_laplacian(directed, sheaf0.base_maps)))
    return SuiteResult("theorem 3: classical special cases", trials, worst, 1e-13)


def suite_magnetic(seed: int, trials: int, max_n: int = 50) -> SuiteResult:
    """Trivial sheaf vs symmetrized-graph operators: factor 2 on digon-free
    directed graphs (sign-magnetic too at q = 1/4), factor 1 on undirected."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        directed = random_mixed_graph(rng, max_n=max_n, directed_only=True)
        for q in Q_GRID:
            dense = laplacian_blocks(trivial_sheaf(directed, q)).dense()
            worst = max(worst, max_abs(dense - 2.0 * magnetic_laplacian(directed, q)))
            if q == 0.25:
                worst = max(worst, max_abs(dense - 2.0 * sign_magnetic_laplacian(directed)))
        undirected = random_mixed_graph(rng, max_n=max_n, undirected_only=True)
        q = Q_GRID[k % len(Q_GRID)]
        dense_u = laplacian_blocks(trivial_sheaf(undirected, q)).dense()
        worst = max(worst, max_abs(dense_u - magnetic_laplacian(undirected, q)))
    return SuiteResult("theorem 4: magnetic / sign-magnetic", trials, worst, 1e-12)


def suite_incidence(seed: int, trials: int, max_n: int = 50) -> SuiteResult:
    """Trivial-sheaf Laplacian equals B B* for the complex incidence matrix."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        graph = random_mixed_graph(rng, max_n=max_n)
        q = Q_GRID[k % len(Q_GRID)]
        dense = laplacian_blocks(trivial_sheaf(graph, q)).dense()
        b = complex_incidence(graph, q)
        worst = max(worst, max_abs(dense - b @ np.conj(b.T)))
    return SuiteResult("theorem 5: incidence factorization", trials, worst, 1e-13)


def suite_phase_conjugation(seed: int, trials: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        q = float(rng.uniform(-2.0, 2.0))
        a_uv, a_vu = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        worst = max(worst, abs(phase(q, a_uv, a_vu) * phase(q, a_vu, a_uv) - 1.0),
                    abs(abs(phase(q, a_uv, a_vu)) - 1.0))
    return SuiteResult("phase: conjugate symmetry, unit modulus", trials, worst, 1e-14)


def run_all_suites(seed: int, trials: int,
                   corpus: list[CorpusItem] | None = None) -> list[SuiteResult]:
    """Every suite at the given trial count (a shared corpus may be injected)."""
    if corpus is None:
        corpus = build_corpus(seed, trials)
    return [
        suite_hermiticity(corpus),
        suite_psd(corpus),
        suite_spectral_cap(corpus),
        suite_assembly(corpus),
        suite_orientation(corpus),
        suite_generalization(seed + 1, trials),
        suite_magnetic(seed + 2, max(trials // 5, 1) if trials else 0),
        suite_incidence(seed + 3, trials),
        suite_phase_conjugation(seed + 4, trials),
    ]
