"""Baseline reduction methods: matching-based contraction heuristics and
Schur-complement (Kron) reduction."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarsening import Hierarchy, HierarchyLevel, Partition, coarsen_laplacian
from .graph import WeightedGraph, build_laplacian

JACOBI_SWEEPS = 20
JACOBI_OMEGA = 2.0 / 3.0


# ---------------------------------------------------------------------------
# Edge scoring
# ---------------------------------------------------------------------------

def heavy_edge_cost(L):
    """Per-edge score -w_ij / max(deg_i, deg_j); heavier edges first."""
    src, dst, w = _edges_of(L)
    deg = np.asarray(L.diagonal()).ravel()
    return src, dst, -w / np.maximum(deg[src], deg[dst])


def jacobi_test_vectors(L, n_vectors, sweeps=JACOBI_SWEEPS, seed=0):
    """Smooth test vectors: damped Jacobi relaxation of L x = 0 from random
    starts, unit-normalized after every sweep. ``sweeps=0`` returns the raw
    random vectors."""
    n = L.shape[0]
    deg = np.asarray(L.diagonal()).ravel()
    if np.any(deg == 0):
        raise ValueError("relaxation undefined for zero-degree vertices")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, n_vectors))
    dinv = 1.0 / deg
    for _ in range(sweeps):
        X = X - JACOBI_OMEGA * (dinv[:, None] * (L @ X))
        X /= np.linalg.norm(X, axis=0)
    return X


def gauss_seidel_test_vectors(L, n_vectors, seed=0):
    """One forward Gauss-Seidel sweep on L x = 0 from random starts."""
    n = L.shape[0]
    deg = np.asarray(L.diagonal()).ravel()
    if np.any(deg == 0):
        raise ValueError("relaxation undefined for zero-degree vertices")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, n_vectors))
    lower = sp.csr_array(sp.tril(L, k=0))
    upper = sp.csr_array(sp.triu(L, k=1))
    lower.indices = lower.indices.astype(np.int32)
    lower.indptr = lower.indptr.astype(np.int32)
    # (D + L_strict_lower) x_new = -U x_old
    X = spla.spsolve_triangular(lower, -(upper @ X), lower=True)
    return np.atleast_2d(X.T).T


def algebraic_distance_cost(L, n_vectors=20, seed=0):
    """Per-edge score: euclidean distance between relaxed test-vector rows."""
    X = jacobi_test_vectors(L, n_vectors, seed=seed)
    src, dst, _ = _edges_of(L)
    diff = X[src] - X[dst]
    return src, dst, np.sqrt(np.einsum("ij,ij->i", diff, diff))


def affinity_cost(L, n_vectors=20, seed=0):
    """Per-edge score: minus the squared cosine similarity of test-vector rows
    after one Gauss-Seidel sweep. Rows with zero norm get affinity 0."""
    X = gauss_seidel_test_vectors(L, n_vectors, seed=seed)
    src, dst, _ = _edges_of(L)
    dots = np.einsum("ij,ij->i", X[src], X[dst])
    norms = np.einsum("ij,ij->i", X, X)
    denom = norms[src] * norms[dst]
    aff = np.zeros(len(dots))
    ok = denom > 0
    aff[ok] = dots[ok] ** 2 / denom[ok]
    return src, dst, -aff


def _edges_of(L):
    coo = sp.coo_array(L)
    mask = (coo.row < coo.col) & (coo.data != 0)
    return coo.row[mask], coo.col[mask], -coo.data[mask]


# ---------------------------------------------------------------------------
# Greedy edge matching
# ---------------------------------------------------------------------------

def matching_level(L, scorer, n_target):
    """Contract a greedy matching of the lowest-score edges.

    Edges are taken in increasing score order (ties on the vertex pair) while
    both endpoints are free, until the target size is reached or the matching
    is maximal. Returns (partition, coarse Laplacian).
    """
    n = L.shape[0]
    src, dst, _ = _edges_of(L)
    _, _, score = scorer(L)
    heap = [(float(s), (int(i), int(j))) for s, i, j in zip(score, src, dst)]
    heapq.heapify(heap)
    matched = np.zeros(n, dtype=bool)
    chosen = []
    n_cur = n
    while heap and n_cur > n_target:
        _, (i, j) = heapq.heappop(heap)
        if matched[i] or matched[j]:
            continue
        matched[i] = matched[j] = True
        chosen.append((i, j))
        n_cur -= 1
    singles = [(v,) for v in np.flatnonzero(~matched)]
    p = Partition(n, tuple(chosen) + tuple(singles))
    return p, coarsen_laplacian(L, p, check_connected=False)


_SCORERS = {
    "heavy-edge": lambda seed: heavy_edge_cost,
    "algebraic-distance": lambda seed: (
        lambda L: algebraic_distance_cost(L, seed=seed)),
    "affinity": lambda seed: (lambda L: affinity_cost(L, seed=seed)),
}


def matching_coarsen(graph: WeightedGraph, method, n_target, seed=0) -> Hierarchy:
    """Multi-level greedy matching with one of the edge scorers."""
    if method not in _SCORERS:
        raise ValueError(f"unknown matching method {method!r}")
    scorer = _SCORERS[method](seed)
    L = build_laplacian(graph)
    levels = []
    stalled = False
    n_cur = graph.n_vertices
    while n_cur > n_target:
        p, L_next = matching_level(L, scorer, n_target)
        if p.is_identity():
            stalled = True
            break
        levels.append(HierarchyLevel(p, L_next, math.nan, method))
        L = L_next
        n_cur = p.n_out
    return Hierarchy(graph, tuple(levels), stalled=stalled)


# ---------------------------------------------------------------------------
# Kron reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KronSequence:
    """Sequence of Schur-complement reductions. Not a contraction hierarchy:
    there is no partition, so quadratic forms are not preserved and the
    consistent-coarsening measurements do not apply."""

    graph: WeightedGraph
    keep_sets: tuple
    laplacians: tuple

    @property
    def n_coarse(self):
        return self.laplacians[-1].shape[0] if self.laplacians else self.graph.n_vertices

    @property
    def coarsest_laplacian(self):
        if not self.laplacians:
            return build_laplacian(self.graph)
        return self.laplacians[-1]


def kron_reduce(L, keep):
    """Schur complement of the Laplacian onto the kept vertex set.

    L_reduced = L[keep, keep] - L[keep, drop] L[drop, drop]^{-1} L[drop, keep].
    The result is again a Laplacian when the dropped block is nonsingular,
    which holds for connected graphs with a nonempty kept set.
    """
    n = L.shape[0]
    keep = np.asarray(sorted(set(int(v) for v in keep)))
    if len(keep) == 0 or len(keep) == n:
        raise ValueError("kept set must be a proper nonempty subset")
    drop = np.setdiff1d(np.arange(n), keep)
    dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
    A = dense[np.ix_(keep, keep)]
    B = dense[np.ix_(keep, drop)]
    C = dense[np.ix_(drop, drop)]
    try:
        red = A - B @ np.linalg.solve(C, B.T)
    except np.linalg.LinAlgError:
        raise ValueError("dropped block is singular; kept set invalid") from None
    red = (red + red.T) / 2
    # clean tiny negative couplings born of roundoff
    off = red - np.diag(np.diag(red))
    off[np.abs(off) < 1e-12 * max(np.abs(red).max(), 1.0)] = 0.0
    off[off > 0] = 0.0
    red = off + np.diag(-off.sum(axis=1))
    return sp.csr_array(red)


def kron_level(L, n_keep=None):
    """Pick a kept set from the sign of the largest Laplacian eigenvector and
    Schur-reduce onto it.

    The positive side is flipped to be the larger one; exact zeros are
    dropped. With ``n_keep`` given, vertices ranked by entry magnitude are
    moved across the sign split to hit the size. A degenerate split falls
    back to a median split of the eigenvector."""
    n = L.shape[0]
    v = None
    if sp.issparse(L) and n > 512:
        # deterministic start vector; ARPACK's default random start would
        # make repeated runs disagree
        v0 = np.random.default_rng(11).standard_normal(n)
        try:
            _, vecs = spla.eigsh(sp.csc_array(L, dtype=np.float64), k=1,
                                 which="LA", maxiter=5000, tol=1e-8, v0=v0)
            v = vecs[:, 0]
        except spla.ArpackNoConvergence:
            v = None
    if v is None:
        dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
        vals, vecs = np.linalg.eigh(dense)
        v = vecs[:, -1]
    if np.sum(v > 0) < np.sum(v < 0):
        v = -v
    keep = v > 0
    if keep.sum() in (0, n):
        keep = v > np.median(v)
        if keep.sum() in (0, n):
            keep = np.zeros(n, dtype=bool)
            keep[np.argsort(v)[n // 2:]] = True
    if n_keep is not None:
        n_keep = int(n_keep)
        if not 1 <= n_keep < n:
            raise ValueError(f"n_keep={n_keep} out of range for n={n}")
        ranked = np.argsort(-np.abs(v))
        current = int(keep.sum())
        if current > n_keep:
            inside = [i for i in ranked[::-1] if keep[i]]
            for i in inside[:current - n_keep]:
                keep[i] = False
        elif current < n_keep:
            outside = [i for i in ranked if not keep[i]]
            for i in outside[:n_keep - current]:
                keep[i] = True
    return np.flatnonzero(keep), kron_reduce(L, np.flatnonzero(keep))


def kron_coarsen(graph: WeightedGraph, n_target) -> KronSequence:
    """Repeated eigenvector-split Schur reduction down to the target size."""
    if not 1 <= n_target < graph.n_vertices:
        raise ValueError("n_target out of range")
    L = build_laplacian(graph)
    keeps, laps = [], []
    n_cur = graph.n_vertices
    while n_cur > n_target:
        want = max(n_target, n_cur // 2)
        keep, L = kron_level(L, n_keep=want)
        keeps.append(tuple(int(v) for v in keep))
        laps.append(L)
        n_cur = L.shape[0]
    return KronSequence(graph, tuple(keeps), tuple(laps))


def run_baseline(graph: WeightedGraph, method, n_target, seed=0):
    """Dispatch a baseline reduction. Matching methods return a
    :class:`Hierarchy`; ``kron`` returns a :class:`KronSequence`."""
    if method == "kron":
        return kron_coarsen(graph, n_target)
    return matching_coarsen(graph, method, n_target, seed=seed)
