"""Directed and mixed graphs: construction, synthetic generation, features, splits."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class EdgeKind(enum.IntEnum):
    """Edge type tag; the integer value doubles as the on-disk code."""

    UNDIRECTED = 0
    DIRECTED = 1


class Edge(NamedTuple):
    u: int
    v: int
    kind: EdgeKind


@dataclass
class DirectedGraph:
    """A mixed graph: ``n`` nodes plus an ordered list of typed edges.

    The edge-list order is stable and defines the edge index used by every
    edge-indexed operator.  Self-loops and parallel edges are rejected; a
    reciprocal directed pair must be ingested as a single undirected edge.
    Instances are treated as immutable after construction.
    """

    n: int
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        edges = []
        seen: set[tuple[int, int]] = set()
        for raw in self.edges:
            u, v, kind = raw
            u, v, kind = int(u), int(v), EdgeKind(kind)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            pair = (min(u, v), max(u, v))
            if pair in seen:
                raise ValueError(f"more than one edge between nodes {pair}")
            seen.add(pair)
            edges.append(Edge(u, v, kind))
        self.edges = tuple(edges)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_slots(self) -> np.ndarray:
        """Ordered endpoints per edge, shape (m, 2).

        Directed edges keep their (source, target) order; undirected edges use
        the canonical (min, max) order.
        """
        out = np.zeros((self.m, 2), dtype=np.int64)
        for i, (u, v, kind) in enumerate(self.edges):
            if kind is EdgeKind.DIRECTED:
                out[i] = (u, v)
            else:
                out[i] = (min(u, v), max(u, v))
        return out

    def is_directed_edge(self) -> np.ndarray:
        """Boolean mask of directed edges, shape (m,)."""
        return np.array([e.kind is EdgeKind.DIRECTED for e in self.edges], dtype=bool)


def adjacency(graph: DirectedGraph) -> np.ndarray:
    """Dense 0/1 adjacency matrix; an undirected edge sets both entries."""
    a = np.zeros((graph.n, graph.n))
    for u, v, kind in graph.edges:
        a[u, v] = 1.0
        if kind is EdgeKind.UNDIRECTED:
            a[v, u] = 1.0
    return a


def degree_features(graph: DirectedGraph) -> np.ndarray:
    """Per-node sum of in- and out-degree as an (n, 1) feature column.

    An undirected edge counts toward both the in- and the out-degree of each
    endpoint.
    """
    feat = np.zeros(graph.n)
    for u, v, kind in graph.edges:
        if kind is EdgeKind.DIRECTED:
            feat[u] += 1.0
            feat[v] += 1.0
        else:
            feat[u] += 2.0
            feat[v] += 2.0
    return feat.reshape(-1, 1)


@dataclass
class DsbmParams:
    """Directed stochastic block model parameters.

    Undirected edges between communities i and j are sampled with probability
    ``alpha[i, j]``; each sampled edge is then oriented from the lower-index
    endpoint's community toward the other with probability ``beta[i, j]``.
    """

    n: int
    communities: int
    alpha: np.ndarray
    beta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        c = int(self.communities)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.n < 1 or c < 1 or self.n % c != 0:
            raise ValueError("node count must be a positive multiple of the community count")
        if self.alpha.shape != (c, c) or self.beta.shape != (c, c):
            raise ValueError("alpha and beta must be (C, C) with one row per community")
        for name, mat in (("alpha", self.alpha), ("beta", self.beta)):
            if np.any(mat < 0.0) or np.any(mat > 1.0):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if np.max(np.abs(self.alpha - self.alpha.T)) > 1e-12:
            raise ValueError("alpha must be symmetric")
        if np.max(np.abs(self.beta + self.beta.T - 1.0)) > 1e-12:
            raise ValueError("beta must satisfy beta[i, j] + beta[j, i] = 1")


def uniform_dsbm_params(n: int, communities: int, alpha_intra: float,
                        alpha_inter: float, beta: float, seed: int = 0) -> DsbmParams:
    """Constant-rate parameters: ``beta`` applies to ordered pairs i < j."""
    c = communities
    alpha = np.full((c, c), float(alpha_inter))
    np.fill_diagonal(alpha, float(alpha_intra))
    b = np.full((c, c), 0.5)
    iu, ju = np.triu_indices(c, k=1)
    b[iu, ju] = float(beta)
    b[ju, iu] = 1.0 - float(beta)
    return DsbmParams(n, c, alpha, b, seed)


def dsbm_communities(n: int, communities: int) -> np.ndarray:
    """Community label per node: contiguous equal-size index blocks."""
    return np.repeat(np.arange(communities), n // communities)


def dsbm_generate(params: DsbmParams) -> DirectedGraph:
    """Sample a purely directed graph from the block model (deterministic in seed)."""
    rng = np.random.default_rng(params.seed)
    comm = dsbm_communities(params.n, params.communities)
    iu, iv = np.triu_indices(params.n, k=1)
    ci, cj = comm[iu], comm[iv]
    present = rng.random(iu.size) < params.alpha[ci, cj]
    forward = rng.random(iu.size) < params.beta[ci, cj]
    edges = []
    for u, v, fwd in zip(iu[present], iv[present], forward[present]):
        if fwd:
            edges.append(Edge(int(u), int(v), EdgeKind.DIRECTED))
        else:
            edges.append(Edge(int(v), int(u), EdgeKind.DIRECTED))
    return DirectedGraph(params.n, tuple(edges))


def make_splits(labels: Sequence[int], fractions: tuple[float, float, float],
                per_class: bool = True, seed: int = 0
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean train/val/test masks, stratified per class when requested.

    Counts per group are floor(fraction * group_size); leftover nodes go to
    train first, then validation.  Deterministic in ``seed``.
    """
    labels = np.asarray(labels)
    ftrain, fval, ftest = (float(f) for f in fractions)
    if min(ftrain, fval, ftest) < 0.0 or abs(ftrain + fval + ftest - 1.0) > 1e-9:
        raise ValueError("fractions must be nonnegative and sum to 1")
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    if per_class:
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    else:
        groups = [np.arange(n)]
    for idx in groups:
        if per_class and idx.size < 3:
            raise ValueError(f"class with {idx.size} members cannot be split three ways")
        perm = rng.permutation(idx)
        k = perm.size
        # the 1e-9 nudge keeps floor() true to the exact rational product
        nt = int(math.floor(ftrain * k + 1e-9))
        nv = int(math.floor(fval * k + 1e-9))
        nte = int(math.floor(ftest * k + 1e-9))
        rem = k - (nt + nv + nte)
        nt += min(rem, 1)
        nv += max(rem - 1, 0)
        train[perm[:nt]] = True
        val[perm[nt:nt + nv]] = True
        test[perm[nt + nv:]] = True
    return train, val, test


@dataclass
class Dataset:
    """A graph with node features, integer labels, and split masks."""

    graph: DirectedGraph
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        n = self.graph.n
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must be (n, f0) with n={n}")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have length n={n}")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative class indices")
        masks = []
        for name in ("train_mask", "val_mask", "test_mask"):
            mask = np.asarray(getattr(self, name), dtype=bool)
            if mask.shape != (n,):
                raise ValueError(f"{name} must have length n={n}")
            masks.append(mask)
            setattr(self, name, mask)
        if np.any(masks[0] & masks[1]) or np.any(masks[0] & masks[2]) or np.any(masks[1] & masks[2]):
            raise ValueError("split masks must be pairwise disjoint")
        present = np.unique(self.labels[self.train_mask])
        if present.size != np.unique(self.labels).size:
            raise ValueError("every class must appear in the train mask")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]
