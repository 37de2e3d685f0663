"""Sparse weighted graphs, Laplacians, incidence factorization and file IO.

Vertex ids are dense 0-based integers. Loaders remap sparse ids and record
the mapping in ``meta``. All matrix algebra downstream assumes dense indexing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _csgraph_cc


class GraphFormatError(ValueError):
    """A graph file could not be parsed or violates basic constraints."""


class DisconnectedGraphError(ValueError):
    """An operation requiring a connected graph received a disconnected one."""


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph with no self-loops or duplicate edges.

    Edges are stored canonically with ``src < dst``, sorted lexicographically.
    Instances are immutable and safe to share across threads.
    """

    n_vertices: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        weight = np.asarray(self.weight, dtype=np.float64)
        if not (len(src) == len(dst) == len(weight)):
            raise ValueError("edge arrays must have equal length")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        if len(weight) and np.any(weight <= 0):
            raise ValueError("edge weights must be strictly positive")
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        if len(lo):
            if lo.min() < 0 or hi.max() >= self.n_vertices:
                raise ValueError("vertex id out of range")
        order = np.lexsort((hi, lo))
        lo, hi, weight = lo[order], hi[order], weight[order]
        if len(lo) > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if dup.any():
                i = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate edge ({lo[i]}, {hi[i]})")
        for name, arr in (("src", lo), ("dst", hi), ("weight", weight)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, n_vertices, edges, meta=None):
        """Build from an iterable of ``(i, j, w)`` tuples."""
        edges = list(edges)
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=np.float64)
        return cls(n_vertices, src, dst, w, meta or {})

    @property
    def n_edges(self):
        return len(self.weight)

    def edges(self):
        """Iterate over canonical ``(i, j, w)`` triples."""
        return zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())

    def adjacency(self):
        """Symmetric sparse weight matrix W."""
        n = self.n_vertices
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([self.weight, self.weight])
        return sp.csr_array((vals, (rows, cols)), shape=(n, n))

    def degrees(self):
        d = np.zeros(self.n_vertices)
        np.add.at(d, self.src, self.weight)
        np.add.at(d, self.dst, self.weight)
        return d


def build_laplacian(g: WeightedGraph) -> sp.csr_array:
    """Combinatorial Laplacian L = D - W of a weighted graph."""
    w = g.adjacency()
    deg = np.asarray(w.sum(axis=1)).ravel()
    return (sp.diags_array(deg) - w).tocsr()


def build_incidence(g: WeightedGraph) -> sp.csr_array:
    """Signed, weight-scaled incidence matrix S with S.T @ S == L.

    Row for edge (i, j) carries +sqrt(w) at i and -sqrt(w) at j.
    """
    m = g.n_edges
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([g.src, g.dst]).ravel()
    rw = np.sqrt(g.weight)
    vals = np.column_stack([rw, -rw]).ravel()
    return sp.csr_array((vals, (rows, cols)), shape=(m, g.n_vertices))


def normalized_laplacian(g: WeightedGraph) -> sp.csr_array:
    """Symmetric normalized Laplacian D^{-1/2} L D^{-1/2}."""
    deg = g.degrees()
    if np.any(deg == 0):
        raise ValueError("normalized Laplacian undefined for zero-degree vertices")
    dinv = sp.diags_array(1.0 / np.sqrt(deg))
    return (dinv @ build_laplacian(g) @ dinv).tocsr()


def connected_components(g: WeightedGraph) -> list[set[int]]:
    """Partition the vertex set into maximal connected sets."""
    ncomp, labels = _csgraph_cc(g.adjacency(), directed=False)
    return [set(np.flatnonzero(labels == c).tolist()) for c in range(ncomp)]


def is_connected(g: WeightedGraph) -> bool:
    return _csgraph_cc(g.adjacency(), directed=False)[0] == 1


def graph_from_laplacian(L) -> WeightedGraph:
    """Recover the weighted graph from a combinatorial Laplacian."""
    coo = sp.coo_array(L)
    mask = (coo.row < coo.col) & (coo.data != 0)
    return WeightedGraph(L.shape[0], coo.row[mask], coo.col[mask], -coo.data[mask])


# ---------------------------------------------------------------------------
# File IO
#
# Edge-list format: whitespace-separated "src dst [weight]" per line, '#'
# comments, weight defaults to 1.0. Duplicate edges are an error (hand-authored
# files; silent summation hides typos). Matrix Market coordinate files may be
# symmetric or general; general files must be symmetric in values.
# ---------------------------------------------------------------------------

def _remap_ids(src, dst, meta):
    ids = np.union1d(src, dst)
    if len(ids) == 0:
        return src, dst, 0
    if ids[0] >= 0 and ids[-1] == len(ids) - 1:
        # already dense 0-based
        return src, dst, int(ids[-1]) + 1
    meta["id_map"] = {int(old): int(new) for new, old in enumerate(ids)}
    lookup = {int(old): new for new, old in enumerate(ids)}
    src = np.array([lookup[int(i)] for i in src], dtype=np.int64)
    dst = np.array([lookup[int(i)] for i in dst], dtype=np.int64)
    return src, dst, len(ids)


def _load_edge_list(path) -> WeightedGraph:
    src, dst, wgt = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'src dst [weight]', got {body!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            if w <= 0:
                raise GraphFormatError(
                    f"{path}:{lineno}: non-positive weight {w}")
            if i == j:
                raise GraphFormatError(f"{path}:{lineno}: self-loop on {i}")
            src.append(i)
            dst.append(j)
            wgt.append(w)
    meta = {"source": str(path), "format": "edge-list"}
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    wgt = np.asarray(wgt)
    # collapse mirrored duplicates; unequal mirrored weights are an error
    seen = {}
    for k in range(len(src)):
        key = (min(src[k], dst[k]), max(src[k], dst[k]))
        if key in seen:
            if wgt[seen[key]] != wgt[k]:
                raise GraphFormatError(
                    f"{path}: asymmetric weights for edge {key}: "
                    f"{wgt[seen[key]]} vs {wgt[k]}")
            src[k] = -1  # drop marker
        else:
            seen[key] = k
    keep = src >= 0
    src, dst, wgt = src[keep], dst[keep], wgt[keep]
    src, dst, n = _remap_ids(src, dst, meta)
    try:
        return WeightedGraph(n, src, dst, wgt, meta)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def _load_matrix_market(path) -> WeightedGraph:
    from scipy.io import mmread

    try:
        mat = sp.coo_array(mmread(path))
    except Exception as exc:
        raise GraphFormatError(f"{path}: {exc}") from None
    if mat.shape[0] != mat.shape[1]:
        raise GraphFormatError(f"{path}: adjacency matrix must be square")
    mat.sum_duplicates()
    asym = abs(mat - mat.T)
    if asym.nnz and asym.max() > 0:
        raise GraphFormatError(f"{path}: matrix is not symmetric in values")
    coo = sp.coo_array(mat)
    mask = coo.row < coo.col
    src, dst, wgt = coo.row[mask], coo.col[mask], coo.data[mask]
    if len(wgt) and wgt.min() <= 0:
        raise GraphFormatError(f"{path}: non-positive weight {wgt.min()}")
    meta = {"source": str(path), "format": "matrix-market"}
    present = np.zeros(mat.shape[0], dtype=bool)
    present[src] = True
    present[dst] = True
    isolated = np.flatnonzero(~present)
    if len(isolated):
        meta["isolated_vertices"] = isolated.tolist()
    return WeightedGraph(mat.shape[0], src, dst, wgt, meta)


def load_graph(path, format=None) -> WeightedGraph:
    """Load a graph from an edge-list or Matrix Market coordinate file."""
    path = Path(path)
    if format is None:
        format = "matrix-market" if path.suffix.lower() in (".mtx", ".mm") else "edge-list"
    if format == "matrix-market":
        return _load_matrix_market(path)
    if format == "edge-list":
        return _load_edge_list(path)
    raise ValueError(f"unknown graph format {format!r}")


def save_graph(g: WeightedGraph, path, format=None):
    """Write a graph; edge-list output uses full-precision decimal weights."""
    path = Path(path)
    if format is None:
        format = "matrix-market" if path.suffix.lower() in (".mtx", ".mm") else "edge-list"
    if format == "edge-list":
        with open(path, "w") as fh:
            fh.write(f"# vertices: {g.n_vertices}\n")
            for i, j, w in g.edges():
                fh.write(f"{i}\t{j}\t{w!r}\n")
    elif format == "matrix-market":
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            fh.write(f"{g.n_vertices} {g.n_vertices} {g.n_edges}\n")
            for i, j, w in g.edges():
                fh.write(f"{j + 1} {i + 1} {w!r}\n")
    else:
        raise ValueError(f"unknown graph format {format!r}")
