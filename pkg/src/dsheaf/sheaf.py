"""Directed cellular sheaves and their Hermitian Laplacian operators.

A sheaf attaches a d-dimensional stalk to every node and edge, with real base
restriction maps per (edge, endpoint).  Orientation enters only through a unit
complex phase on the second endpoint of each directed edge, so the resulting
Laplacian is Hermitian with direction encoded in its imaginary part.

The phase convention is exp(i * 2*pi*q * (A_uv - A_vu)): a directed edge
(u, v) carries phase exp(+i*2*pi*q) at q's worth of rotation, which equals +i
at q = 1/4.  All oracle operators in this module (magnetic, sign-magnetic,
incidence) follow the same convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph, EdgeKind, adjacency
from .linalg import (
    DEFAULT_CLAMP,
    BlockMatrix,
    as_complex,
    herm_eigvals,
    hermiticity_defect,
    inv_sqrt_psd,
    max_abs,
)

DENSE_EIG_CAP = 2000


class MapClass(str, enum.Enum):
    """Structure imposed on the d x d restriction maps."""

    DIAGONAL = "diagonal"
    ORTHOGONAL = "orthogonal"
    GENERAL = "general"


@dataclass
class SheafConfig:
    d: int
    q: float
    map_class: MapClass = MapClass.GENERAL

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"stalk dimension must be >= 1, got {self.d}")
        self.q = float(self.q)
        self.map_class = MapClass(self.map_class)


def phase(q: float, a_uv, a_vu) -> complex:
    """Unit phase attached to the ordered node pair (u, v)."""
    return complex(np.exp(1j * (2.0 * np.pi * q) * (a_uv - a_vu)))


def edge_phases(graph: DirectedGraph, q: float) -> np.ndarray:
    """Phase carried by each edge's second endpoint, shape (m,).

    Directed edges carry phase(q, 1, 0); undirected edges carry exactly 1.
    """
    out = np.ones(graph.m, dtype=np.complex128)
    directed = graph.is_directed_edge()
    if directed.any():
        out[directed] = phase(q, 1, 0)
    return out


@dataclass
class DirectedCellularSheaf:
    """Real base restriction maps plus derived phases over a mixed graph.

    ``base_maps`` has shape (m, 2, d, d): slot 0 is the edge's first endpoint
    (source for directed edges, min index otherwise), slot 1 the second.  The
    phase multiplies only slot 1 of directed edges; base maps stay real.
    """

    graph: DirectedGraph
    config: SheafConfig
    base_maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.base_maps, dtype=np.float64)
        expected = (self.graph.m, 2, self.config.d, self.config.d)
        if maps.shape != expected:
            raise ValueError(f"base_maps must have shape {expected}, got {maps.shape}")
        if not np.all(np.isfinite(maps)):
            raise ValueError("base maps must be finite")
        self.base_maps = maps

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def q(self) -> float:
        return self.config.q

    def effective_maps(self) -> np.ndarray:
        """Complex restriction maps with phases applied, shape (m, 2, d, d)."""
        eff = self.base_maps.astype(np.complex128)
        eff[:, 1] *= edge_phases(self.graph, self.q)[:, None, None]
        return eff


def trivial_sheaf(graph: DirectedGraph, q: float) -> DirectedCellularSheaf:
    """d = 1 sheaf whose base maps are all [1]."""
    config = SheafConfig(d=1, q=q, map_class=MapClass.GENERAL)
    return DirectedCellularSheaf(graph, config, np.ones((graph.m, 2, 1, 1)))


def coboundary(sheaf: DirectedCellularSheaf) -> BlockMatrix:
    """Node-to-edge block operator, m x n blocks.

    Row e holds +F(first) at the first endpoint's column and -F(second) at
    the second's; directed edges order endpoints (source, target), undirected
    edges (min, max).
    """
    graph = sheaf.graph
    eff = sheaf.effective_maps()
    slots = graph.edge_slots()
    delta = BlockMatrix(graph.m, graph.n, sheaf.d)
    for e in range(graph.m):
        a, b = int(slots[e, 0]), int(slots[e, 1])
        delta.add_block(e, a, eff[e, 0])
        delta.add_block(e, b, -eff[e, 1])
    return delta


def laplacian_from_coboundary(delta: BlockMatrix) -> BlockMatrix:
    """Compose the coboundary with its conjugate transpose."""
    return delta.conj_transpose().matmul(delta)


def _diagonal_blocks(eff: np.ndarray, slots: np.ndarray, n: int) -> np.ndarray:
    """Sum of F*F over incident (edge, endpoint) pairs, shape (n, d, d)."""
    d = eff.shape[-1]
    out = np.zeros((n, d, d), dtype=np.complex128)
    for e in range(eff.shape[0]):
        for slot in (0, 1):
            f = eff[e, slot]
            out[slots[e, slot]] += np.conj(f.T) @ f
    return out


def laplacian_blocks(sheaf: DirectedCellularSheaf) -> BlockMatrix:
    """Assemble the Laplacian directly from its per-pair block formulas.

    Off-diagonal block (u, v) is -F(u)* F(v) for the single edge joining u
    and v (zero when there is none); diagonal block (u, u) sums F*F over the
    edges incident to u.
    """
    graph = sheaf.graph
    eff = sheaf.effective_maps()
    slots = graph.edge_slots()
    lap = BlockMatrix(graph.n, graph.n, sheaf.d)
    for e in range(graph.m):
        a, b = int(slots[e, 0]), int(slots[e, 1])
        fa, fb = eff[e, 0], eff[e, 1]
        lap.add_block(a, b, -(np.conj(fa.T) @ fb))
        lap.add_block(b, a, -(np.conj(fb.T) @ fa))
    for u, block in enumerate(_diagonal_blocks(eff, slots, graph.n)):
        if np.any(block):
            lap.add_block(u, u, block)
    return lap


def degree_blocks(sheaf: DirectedCellularSheaf) -> np.ndarray:
    """Per-node degree blocks, shape (n, d, d); each is Hermitian PSD.

    Equals the diagonal of :func:`laplacian_blocks` by construction.
    """
    return _diagonal_blocks(sheaf.effective_maps(), sheaf.graph.edge_slots(), sheaf.graph.n)


def normalize(lap: BlockMatrix, deg: np.ndarray, clamp: float = DEFAULT_CLAMP) -> BlockMatrix:
    """Degree-normalized Laplacian: block (u, v) -> D_u^{-1/2} L_uv D_v^{-1/2}.

    Singular degree blocks (isolated nodes, rank-deficient maps) go through
    the pseudo-inverse clamp, which zeroes the affected rows and columns.
    Each block pair is sandwiched once and mirrored, so the output is
    Hermitian to the last bit even when the scalers are ill-conditioned.
    """
    deg = np.asarray(deg)
    if deg.shape[0] != lap.block_rows:
        raise ValueError("one degree block per node is required")
    scalers = [inv_sqrt_psd(deg[u], clamp) for u in range(deg.shape[0])]
    out = BlockMatrix(lap.block_rows, lap.block_cols, lap.d)
    for (u, v), block in lap.blocks.items():
        if u > v:
            continue
        sandwiched = scalers[u] @ block @ scalers[v]
        if u == v:
            out.set_block(u, u, 0.5 * (sandwiched + np.conj(sandwiched.T)))
        else:
            out.set_block(u, v, sandwiched)
            out.set_block(v, u, np.conj(sandwiched.T))
    return out


def normalized_laplacian(sheaf: DirectedCellularSheaf, clamp: float = DEFAULT_CLAMP) -> BlockMatrix:
    """Convenience: normalize(laplacian_blocks(sheaf), degree_blocks(sheaf))."""
    return normalize(laplacian_blocks(sheaf), degree_blocks(sheaf), clamp)


def magnetic_laplacian(graph: DirectedGraph, q: float, normalized: bool = False) -> np.ndarray:
    """Hermitian Laplacian of the symmetrized graph with direction phases.

    Built as D_s - A_s * exp(i*2*pi*q*(A - A^T)) with A_s = (A + A^T)/2;
    the normalized variant is I - D_s^{-1/2} H D_s^{-1/2} with a pseudo-inverse
    on zero degrees.
    """
    a = adjacency(graph)
    a_s = 0.5 * (a + a.T)
    d_s = a_s.sum(axis=1)
    h = a_s * np.exp(1j * (2.0 * np.pi * q) * (a - a.T))
    if not normalized:
        return np.diag(d_s).astype(np.complex128) - h
    with np.errstate(divide="ignore"):
        s = np.where(d_s > 0.0, 1.0 / np.sqrt(np.where(d_s > 0.0, d_s, 1.0)), 0.0)
    return np.eye(graph.n, dtype=np.complex128) - (s[:, None] * h * s[None, :])


def sign_magnetic_laplacian(graph: DirectedGraph) -> np.ndarray:
    """Sign-based Hermitian Laplacian; equals the q = 1/4 phase variant on
    unweighted graphs."""
    a = adjacency(graph)
    a_s = 0.5 * (a + a.T)
    d_bar = np.abs(a_s).sum(axis=1)
    h = a_s * (1.0 - np.sign(np.abs(a - a.T)) + 1j * np.sign(np.abs(a) - np.abs(a.T)))
    return np.diag(d_bar).astype(np.complex128) - h


def complex_incidence(graph: DirectedGraph, q: float) -> np.ndarray:
    """Complex node-to-edge incidence matrix, shape (n, m).

    Column e has +1 at a directed edge's source (or the smaller endpoint of
    an undirected edge), -1 at the larger endpoint of an undirected edge, and
    -phase(q, A_tu, A_ut) at a directed edge's target t with source u.
    """
    a = adjacency(graph)
    out = np.zeros((graph.n, graph.m), dtype=np.complex128)
    for e, (u, v, kind) in enumerate(graph.edges):
        if kind is EdgeKind.DIRECTED:
            out[u, e] = 1.0
            out[v, e] = -phase(q, a[v, u], a[u, v])
        else:
            out[min(u, v), e] = 1.0
            out[max(u, v), e] = -1.0
    return out


@dataclass
class SpectralReport:
    hermiticity_defect: float
    min_eig: float
    max_eig: float


def spectral_report(lap: BlockMatrix, *, max_dense: int = DENSE_EIG_CAP) -> SpectralReport:
    """Hermiticity defect and eigenvalue range of a block operator."""
    dense = lap.dense()
    if dense.shape[0] > max_dense:
        raise ValueError(f"matrix of size {dense.shape[0]} exceeds dense eigensolve cap {max_dense}")
    defect = hermiticity_defect(dense)
    if dense.shape[0] == 0:
        return SpectralReport(defect, 0.0, 0.0)
    eigs = herm_eigvals(0.5 * (dense + np.conj(dense.T)))
    return SpectralReport(defect, float(eigs[0]), float(eigs[-1]))
