"""Local variation coarsening: subspace bookkeeping, candidate families,
and the greedy single- and multi-level contraction algorithms."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarsening import (DENSE_GUARD, Hierarchy, HierarchyLevel, Partition,
                         coarsen_laplacian, project)
from .graph import WeightedGraph, build_laplacian
from .spectral import smallest_eigenpairs

# eigenvalues of the k x k Gram below this relative threshold are treated as
# zero; the constant-vector column is analytically null and numerical noise
# must not resurrect it
PSEUDO_SQRT_RTOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """The pair (B, A) tracking the target subspace across levels.

    B follows the recursion B_l = P_l B_{l-1}; A re-normalizes B against the
    current Laplacian so that local variation costs are measured in the right
    metric.
    """

    B: np.ndarray
    A: np.ndarray

    @property
    def k(self):
        return self.B.shape[1]


def _pseudo_sqrt_inv(G):
    """Symmetric pseudo-inverse square root with a relative null threshold."""
    G = (G + G.T) / 2
    vals, vecs = np.linalg.eigh(G)
    cutoff = PSEUDO_SQRT_RTOL * max(vals[-1], 0.0)
    inv = np.where(vals > cutoff, 1.0 / np.sqrt(np.maximum(vals, 1e-300)), 0.0)
    return (vecs * inv) @ vecs.T


def _fast_eigenspace_seed(L, k):
    """Fixed-budget block solve for the k smallest eigenpairs.

    A capped number of LOBPCG iterations keeps the seeding cost linear in
    edges regardless of how clustered the low spectrum is. Accuracy is modest
    but the vectors only steer the greedy contraction; returns None when the
    residuals come out unusable so the caller can fall back to the precise
    solver.
    """
    n = L.shape[0]
    csr = sp.csr_matrix(L, dtype=np.float64)
    scale = float(np.max(csr.diagonal())) or 1.0
    const = np.full((n, 1), 1.0 / np.sqrt(n))
    rng = np.random.default_rng(7)
    X = rng.standard_normal((n, k + 2))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            vals, vecs = spla.lobpcg(
                csr, X, M=sp.diags(1.0 / csr.diagonal()), Y=const,
                largest=False, tol=1e-7 * scale, maxiter=100)
        except Exception:
            return None
    order = np.argsort(vals)[:k - 1]
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(csr @ vecs - vecs * vals, axis=0)
    if np.any(res > 1e-2 * scale) or np.any(vals < -1e-8 * scale):
        return None
    return (np.concatenate([[0.0], np.maximum(vals, 0.0)]),
            np.hstack([const, vecs]))


def initial_basis(L, k) -> SubspaceBasis:
    """Eigenspace seed: columns u_i / sqrt(lambda_i), with a zero column for
    the nullspace. For this choice A equals B."""
    vals = None
    if L.shape[0] > 512 and k >= 2 and sp.issparse(L):
        out = _fast_eigenspace_seed(L, k)
        if out is not None:
            vals, vecs = out
    if vals is None:
        eig = smallest_eigenpairs(L, k)
        vals, vecs = eig.values, eig.vectors
    inv = np.where(vals > 1e-12,
                   1.0 / np.sqrt(np.maximum(vals, 1e-300)), 0.0)
    B = vecs * inv
    return SubspaceBasis(B, B)


def explicit_basis(L, V) -> SubspaceBasis:
    """Seed from an arbitrary orthonormal basis V: A0 = V V' L^{+1/2}.

    Dense, size-guarded; the eigenspace path should be preferred at scale.
    """
    n = L.shape[0]
    if n > DENSE_GUARD:
        raise ValueError(f"explicit basis refused for n > {DENSE_GUARD}")
    dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
    vals, vecs = np.linalg.eigh(dense)
    cutoff = 1e-12 * max(vals[-1], 0.0)
    inv = np.where(vals > cutoff, 1.0 / np.sqrt(np.maximum(vals, 1e-300)), 0.0)
    L_pinv_sqrt = (vecs * inv) @ vecs.T
    V = np.asarray(V, dtype=np.float64)
    B = V @ (V.T @ L_pinv_sqrt)
    return SubspaceBasis(B, B)


def advance_basis(basis: SubspaceBasis, p: Partition, L_next) -> SubspaceBasis:
    """Carry the basis through one level: B' = P B, A' = B'(B''L'B')^{+1/2}."""
    B = project(p, basis.B)
    G = B.T @ (L_next @ B)
    A = B @ _pseudo_sqrt_inv(G)
    return SubspaceBasis(B, A)


# ---------------------------------------------------------------------------
# Local quantities
# ---------------------------------------------------------------------------

def local_laplacian(L, members) -> sp.csr_array:
    """Laplacian of the locally modified graph: internal edges keep their
    weight, boundary edges are doubled, everything else is zero."""
    members = sorted(set(int(v) for v in members))
    if not members:
        raise ValueError("empty vertex set")
    n = L.shape[0]
    inside = np.zeros(n, dtype=bool)
    inside[members] = True
    coo = sp.coo_array(L)
    mask = (coo.row < coo.col) & (coo.data != 0)
    r, c, w = coo.row[mask], coo.col[mask], -coo.data[mask]
    touch_r, touch_c = inside[r], inside[c]
    factor = np.where(touch_r & touch_c, 1.0,
                      np.where(touch_r | touch_c, 2.0, 0.0))
    keep = factor > 0
    r, c, w = r[keep], c[keep], w[keep] * factor[keep]
    adj = sp.coo_array(
        (np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))),
        shape=(n, n)).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags_array(deg) - adj).tocsr()


def local_projection_comp(members, x):
    """Subtract the mean over the set inside it, zero outside."""
    x = np.asarray(x, dtype=np.float64)
    idx = np.asarray(sorted(set(int(v) for v in members)))
    out = np.zeros_like(x)
    out[idx] = x[idx] - x[idx].mean(axis=0)
    return out


def _local_quadratic(L, idx):
    """Restriction of the boundary-doubled local Laplacian to the set.

    Because the complement projection is zero outside the set, the local
    seminorm only needs the |C| x |C| block: the induced Laplacian plus a
    diagonal of twice the boundary weight.
    """
    sub = np.asarray(L[np.ix_(idx, idx)].todense() if sp.issparse(L) else L[np.ix_(idx, idx)])
    internal_deg = -(sub.sum(axis=1) - sub.diagonal())
    boundary = sub.diagonal() - internal_deg
    return sub + np.diag(boundary)


def local_variation_cost(members, A, L) -> float:
    """cost(C) = ||Pi_C_comp A||^2_{L_C} / (|C| - 1).

    The norm is the top eigenvalue of whichever Gram form is smaller,
    the k x k or the |C| x |C| one.
    """
    idx = np.asarray(sorted(set(int(v) for v in members)))
    if len(idx) < 2:
        raise ValueError("local variation cost requires |C| >= 2")
    A = np.asarray(A, dtype=np.float64)
    Z = A[idx] - A[idx].mean(axis=0)
    M = _local_quadratic(L, idx)
    if Z.shape[1] <= len(idx):
        G = Z.T @ M @ Z
    else:
        # |C| < k: the |C| x |C| form M^{1/2} Z Z' M^{1/2} is cheaper,
        # realized without a matrix square root through eigh of M
        vals, vecs = np.linalg.eigh(M)
        half = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
        Y = half @ Z
        G = Y @ Y.T
    top = np.linalg.eigvalsh((G + G.T) / 2)[-1]
    return float(max(top, 0.0)) / (len(idx) - 1)


def edge_costs(g_edges, degrees, A):
    """Vectorized local variation cost for all edge candidates.

    For C = {i, j} the cost reduces to (deg_i + deg_j) ||A_i - A_j||^2 / 2.
    """
    src, dst = g_edges
    diff = A[src] - A[dst]
    return 0.5 * (degrees[src] + degrees[dst]) * np.einsum("ij,ij->i", diff, diff)


# ---------------------------------------------------------------------------
# Candidate families
# ---------------------------------------------------------------------------

@dataclass
class CandidateFamily:
    """Cost-ordered pool of candidate contraction sets.

    Ties break on the lexicographically smallest member tuple so runs are
    deterministic. Stale entries are dropped lazily on pop.
    """

    kind: str
    heap: list

    def push(self, cost, members):
        heapq.heappush(self.heap, (cost, members))

    def pop(self):
        return heapq.heappop(self.heap)

    def __len__(self):
        return len(self.heap)


def _edges_of(L):
    coo = sp.coo_array(L)
    mask = (coo.row < coo.col) & (coo.data != 0)
    return coo.row[mask], coo.col[mask], -coo.data[mask]


def edge_family(L, A) -> CandidateFamily:
    """One candidate set per edge."""
    src, dst, _ = _edges_of(L)
    deg = np.asarray(L.diagonal()).ravel()
    costs = edge_costs((src, dst), deg, np.asarray(A, dtype=np.float64))
    heap = [(float(c), (int(i), int(j))) for c, i, j in zip(costs, src, dst)]
    heapq.heapify(heap)
    return CandidateFamily("edge", heap)


def neighborhood_family(L, A) -> CandidateFamily:
    """One candidate set per closed vertex neighborhood."""
    csr = sp.csr_array(L)
    n = L.shape[0]
    heap = []
    for v in range(n):
        cols = csr.indices[csr.indptr[v]:csr.indptr[v + 1]]
        vals = csr.data[csr.indptr[v]:csr.indptr[v + 1]]
        members = tuple(sorted({v, *cols[(vals != 0) & (cols != v)].tolist()}))
        if len(members) < 2:
            continue
        heap.append((local_variation_cost(members, A, L), members))
    heapq.heapify(heap)
    return CandidateFamily("neighborhood", heap)


def make_family(L, A, kind) -> CandidateFamily:
    if kind == "edge":
        return edge_family(L, A)
    if kind == "neighborhood":
        return neighborhood_family(L, A)
    raise ValueError(f"unknown candidate family {kind!r}")


# ---------------------------------------------------------------------------
# Greedy contraction
# ---------------------------------------------------------------------------

def coarsen_level(L, basis: SubspaceBasis, sigma_threshold, n_target,
                  family_kind="edge", family: CandidateFamily = None):
    """One greedy level: pop candidates by increasing cost, contract those
    whose members are unmarked and whose cost fits the remaining budget.

    Budget-failing candidates with no marked member are discarded rather than
    reinserted (reinsertion would loop). Returns (partition, coarse Laplacian,
    sigma) with singleton padding; sigma is sqrt of the accumulated
    (|C|-1) cost terms.
    """
    n = L.shape[0]
    A = basis.A
    if family is None:
        family = make_family(L, A, family_kind)
    marked = np.zeros(n, dtype=bool)
    chosen = []
    n_cur = n
    sigma2 = 0.0
    finite = math.isfinite(sigma_threshold)
    while len(family) and n_cur > n_target:
        cost, members = family.pop()
        alive = [v for v in members if not marked[v]]
        if len(alive) == len(members):
            increment = (len(members) - 1) * cost
            if not finite or sigma_threshold >= math.sqrt(sigma2 + increment):
                marked[list(members)] = True
                chosen.append(members)
                n_cur -= len(members) - 1
                sigma2 += increment
            # else: unaffordable as-is; drop it
        elif len(alive) > 1:
            pruned = tuple(alive)
            family.push(local_variation_cost(pruned, A, L), pruned)
    singles = [(v,) for v in np.flatnonzero(~marked)]
    partition = Partition(n, tuple(chosen) + tuple(singles))
    # chosen sets came from the current graph's edges/neighborhoods, so
    # connectivity holds by construction
    L_next = coarsen_laplacian(L, partition, check_connected=False)
    return partition, L_next, math.sqrt(sigma2)


def coarsen_multilevel(graph: WeightedGraph, k=None, basis_vectors=None,
                       eps_threshold=math.inf, n_target=1,
                       family_kind="edge", method_tag=None) -> Hierarchy:
    """Multi-level coarsening to a target size under a cumulative error budget.

    Either ``k`` (principal eigenspace dimension) or ``basis_vectors`` (an
    explicit orthonormal basis) selects the preserved subspace. The per-level
    budget shrinks so that the product bound prod(1+sigma_l)-1 never exceeds
    ``eps_threshold``. A level that achieves no contraction stops the loop and
    flags the hierarchy as stalled.
    """
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    if (k is None) == (basis_vectors is None):
        raise ValueError("specify exactly one of k or basis_vectors")
    L = build_laplacian(graph)
    basis = (initial_basis(L, k) if basis_vectors is None
             else explicit_basis(L, basis_vectors))
    if method_tag is None:
        method_tag = f"local-var-{family_kind}"
    levels = []
    eps = 0.0
    stalled = False
    n_cur = graph.n_vertices
    while n_cur > n_target and eps < eps_threshold:
        if math.isinf(eps_threshold):
            sigma_budget = math.inf
        else:
            sigma_budget = (1 + eps_threshold) / (1 + eps) - 1
        partition, L_next, sigma = coarsen_level(
            L, basis, sigma_budget, n_target, family_kind)
        if partition.is_identity():
            stalled = True
            break
        basis = advance_basis(basis, partition, L_next)
        eps = (1 + eps) * (1 + sigma) - 1
        levels.append(HierarchyLevel(partition, L_next, sigma, method_tag))
        L = L_next
        n_cur = partition.n_out
    return Hierarchy(graph, tuple(levels), stalled=stalled)
