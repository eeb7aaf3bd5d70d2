"""Plain-text dataset formats: edge lists, feature tables, label files.

Edge-list files are UTF-8 text.  The first data line is the node count, each
following data line is ``u v k`` with ``k = 0`` for an undirected edge and
``k = 1`` for a directed edge u -> v.  Blank lines and lines starting with
``#`` are ignored in every format.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .graph import DirectedGraph, Edge, EdgeKind

logger = logging.getLogger(__name__)


def _data_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped


def load_edge_list(path) -> DirectedGraph:
    """Parse an edge-list file.

    A reciprocal pair of directed lines is merged into one undirected edge at
    the position of the first line of the pair; the merge is logged as a
    warning.  Any other repeated node pair is an error.
    """
    path = Path(path)
    lines = _data_lines(path.read_text(encoding="utf-8"))
    header = next(lines, None)
    if header is None:
        raise ValueError(f"{path}: no node-count header line")
    lineno, text = header
    try:
        n = int(text)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: node-count header must be an integer, got {text!r}") from None

    edges: list[Edge] = []
    position: dict[tuple[int, int], int] = {}
    for lineno, text in lines:
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'u v k', got {text!r}")
        try:
            u, v, k = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer field in {text!r}") from None
        if k not in (0, 1):
            raise ValueError(f"{path}:{lineno}: edge kind must be 0 or 1, got {k}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"{path}:{lineno}: node index out of range for n={n}")
        if u == v:
            raise ValueError(f"{path}:{lineno}: self-loop at node {u}")
        pair = (min(u, v), max(u, v))
        if pair in position:
            j = position[pair]
            prev = edges[j]
            reciprocal = (k == 1 and prev.kind is EdgeKind.DIRECTED
                          and prev.u == v and prev.v == u)
            if not reciprocal:
                raise ValueError(f"{path}:{lineno}: duplicate edge between nodes {pair}")
            edges[j] = Edge(prev.u, prev.v, EdgeKind.UNDIRECTED)
            logger.warning("%s:%d: reciprocal directed pair (%d, %d)/(%d, %d) merged "
                           "into one undirected edge", path, lineno, prev.u, prev.v, u, v)
        else:
            position[pair] = len(edges)
            edges.append(Edge(u, v, EdgeKind(k)))
    return DirectedGraph(n, tuple(edges))


def save_edge_list(graph: DirectedGraph, path) -> None:
    """Write the canonical form: node-count header, one ``u v k`` row per edge."""
    lines = [str(graph.n)]
    lines.extend(f"{u} {v} {int(kind)}" for u, v, kind in graph.edges)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_features(path, expected_rows: int | None = None) -> np.ndarray:
    """Read a headerless numeric CSV into an (n, f0) float matrix."""
    path = Path(path)
    rows = []
    width = None
    for lineno, text in _data_lines(path.read_text(encoding="utf-8")):
        fields = text.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
    out = np.asarray(rows, dtype=np.float64)
    if out.size == 0:
        raise ValueError(f"{path}: no feature rows")
    if expected_rows is not None and out.shape[0] != expected_rows:
        raise ValueError(f"{path}: feature row count {out.shape[0]} != node count {expected_rows}")
    return out


def save_features(features: np.ndarray, path) -> None:
    features = np.asarray(features, dtype=np.float64)
    lines = [",".join(repr(float(x)) for x in row) for row in features]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_labels(path, expected_rows: int | None = None) -> np.ndarray:
    """Read one integer label per data line."""
    path = Path(path)
    values = []
    for lineno, text in _data_lines(path.read_text(encoding="utf-8")):
        try:
            values.append(int(text))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: label must be an integer, got {text!r}") from None
    out = np.asarray(values, dtype=np.int64)
    if expected_rows is not None and out.shape[0] != expected_rows:
        raise ValueError(f"{path}: label count {out.shape[0]} != node count {expected_rows}")
    return out


def save_labels(labels, path) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    Path(path).write_text("\n".join(str(int(x)) for x in labels) + "\n", encoding="utf-8")
