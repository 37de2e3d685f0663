"""Partitions, coarsening operators, coarse-Laplacian assembly and hierarchies.

A :class:`Partition` holds the contraction sets of one level. The four
coarsening operators (P, P+, Pi, Pi_comp) are never materialized for large
graphs; the assignment vector and set sizes define them all. Dense
materialization exists behind a size guard for oracle tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _csgraph_cc

from .graph import WeightedGraph, build_laplacian, graph_from_laplacian

DENSE_GUARD = 2000

HIERARCHY_SCHEMA_VERSION = 1


class PartitionMismatchError(ValueError):
    """Partition does not cover the operand's index range."""


class DisconnectedSetError(ValueError):
    """A non-singleton contraction set does not induce a connected subgraph."""


class HierarchyFormatError(ValueError):
    """A serialized hierarchy is malformed or fails its invariants."""


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``range(n_in)`` by contraction sets.

    Singleton sets are stored explicitly so every partition is a total cover.
    """

    n_in: int
    sets: tuple

    def __post_init__(self):
        sets = tuple(tuple(sorted(int(v) for v in s)) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        assign = np.full(self.n_in, -1, dtype=np.int64)
        sizes = np.empty(len(sets), dtype=np.int64)
        for r, members in enumerate(sets):
            if len(members) == 0:
                raise ValueError("empty contraction set")
            members = np.asarray(members)
            if members.min() < 0 or members.max() >= self.n_in:
                raise PartitionMismatchError("vertex id out of range")
            if np.any(assign[members] != -1):
                raise ValueError("contraction sets overlap")
            assign[members] = r
            sizes[r] = len(members)
        if np.any(assign == -1):
            raise ValueError("contraction sets do not cover the vertex range")
        assign.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "assign", assign)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_assign(cls, assign):
        assign = np.asarray(assign)
        n_out = int(assign.max()) + 1 if len(assign) else 0
        sets = [[] for _ in range(n_out)]
        for v, r in enumerate(assign):
            sets[int(r)].append(v)
        return cls(len(assign), tuple(tuple(s) for s in sets))

    @classmethod
    def identity(cls, n):
        return cls(n, tuple((v,) for v in range(n)))

    @property
    def n_out(self):
        return len(self.sets)

    def is_identity(self):
        return self.n_out == self.n_in

    def validate_connected(self, L):
        """Check that every non-singleton set induces a connected subgraph."""
        adj = sp.csr_array(abs(L))
        for members in self.sets:
            if len(members) == 1:
                continue
            idx = np.asarray(members)
            sub = adj[np.ix_(idx, idx)]
            sub.setdiag(0)
            if _csgraph_cc(sub, directed=False)[0] != 1:
                raise DisconnectedSetError(
                    f"contraction set {members} induces a disconnected subgraph")


def project(p: Partition, x):
    """Apply the coarsening matrix P: per-set means. Accepts vectors or columns."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != p.n_in:
        raise ValueError(f"dimension mismatch: {x.shape[0]} != {p.n_in}")
    out_shape = (p.n_out,) + x.shape[1:]
    out = np.zeros(out_shape)
    np.add.at(out, p.assign, x)
    sizes = p.sizes if x.ndim == 1 else p.sizes[:, None]
    return out / sizes


def lift(p: Partition, x_c):
    """Apply the pseudo-inverse P+: copy each set's value to its members."""
    x_c = np.asarray(x_c, dtype=np.float64)
    if x_c.shape[0] != p.n_out:
        raise ValueError(f"dimension mismatch: {x_c.shape[0]} != {p.n_out}")
    return x_c[p.assign]


def pi(p: Partition, x):
    """The projection Pi = P+ P."""
    return lift(p, project(p, x))


def pi_comp(p: Partition, x):
    """The complement projection I - P+ P."""
    x = np.asarray(x, dtype=np.float64)
    return x - pi(p, x)


def sparse_P(p: Partition) -> sp.csr_array:
    """The coarsening matrix P as a sparse n_out x n_in matrix."""
    vals = 1.0 / p.sizes[p.assign]
    cols = np.arange(p.n_in)
    return sp.csr_array((vals, (p.assign, cols)), shape=(p.n_out, p.n_in))


def sparse_P_plus(p: Partition) -> sp.csr_array:
    vals = np.ones(p.n_in)
    rows = np.arange(p.n_in)
    return sp.csr_array((vals, (rows, p.assign)), shape=(p.n_in, p.n_out))


def dense_P(p: Partition):
    """Dense coarsening matrix; guarded, for oracle tests only."""
    if p.n_in > DENSE_GUARD:
        raise ValueError(f"dense materialization refused for n > {DENSE_GUARD}")
    return sparse_P(p).toarray()


def dense_P_plus(p: Partition):
    if p.n_in > DENSE_GUARD:
        raise ValueError(f"dense materialization refused for n > {DENSE_GUARD}")
    return sparse_P_plus(p).toarray()


def coarsen_laplacian(L, p: Partition, check_connected=True) -> sp.csr_array:
    """Coarse combinatorial Laplacian for Laplacian consistent coarsening.

    Equals the dense P^{-+} L P^{+} but assembled from cut weights, which
    keeps the Laplacian form exact: off-diagonal (r, q) is minus the total
    weight of edges between set r and set q.
    """
    if L.shape[0] != p.n_in:
        raise PartitionMismatchError(
            f"partition covers {p.n_in} vertices, Laplacian has {L.shape[0]}")
    if check_connected:
        p.validate_connected(L)
    coo = sp.coo_array(L)
    mask = coo.row < coo.col
    r = p.assign[coo.row[mask]]
    q = p.assign[coo.col[mask]]
    w = -coo.data[mask]
    cross = r != q
    r, q, w = r[cross], q[cross], w[cross]
    n = p.n_out
    adj = sp.coo_array(
        (np.concatenate([w, w]), (np.concatenate([r, q]), np.concatenate([q, r]))),
        shape=(n, n)).tocsr()
    adj.sum_duplicates()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags_array(deg) - adj).tocsr()


@dataclass(frozen=True)
class HierarchyLevel:
    """One coarsening level: its partition, coarse Laplacian and variation cost.

    ``sigma`` is NaN for baseline methods that carry no variation-cost
    semantics.
    """

    partition: Partition
    laplacian: sp.csr_array
    sigma: float
    method_tag: str = ""

    @property
    def n_out(self):
        return self.partition.n_out


@dataclass(frozen=True)
class Hierarchy:
    """Ordered sequence of consistent-coarsening levels over a base graph."""

    graph: WeightedGraph
    levels: tuple
    stalled: bool = False
    base_laplacian: sp.csr_array = field(default=None, compare=False)

    def __post_init__(self):
        if self.base_laplacian is None:
            object.__setattr__(self, "base_laplacian", build_laplacian(self.graph))
        sizes = self.level_sizes()
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"level sizes must strictly decrease, got {sizes}")

    @property
    def n_levels(self):
        return len(self.levels)

    def level_sizes(self):
        return [self.graph.n_vertices] + [lv.n_out for lv in self.levels]

    @property
    def n_coarse(self):
        return self.level_sizes()[-1]

    @property
    def coarsest_laplacian(self):
        if not self.levels:
            return self.base_laplacian
        return self.levels[-1].laplacian

    @property
    def sigmas(self):
        return np.array([lv.sigma for lv in self.levels])

    @property
    def eps_bound(self):
        return float(np.prod(1.0 + self.sigmas) - 1.0)

    def project(self, x):
        """Composed P = P_c ... P_1 applied to a base-level vector or matrix."""
        for lv in self.levels:
            x = project(lv.partition, x)
        return x

    def lift(self, x_c):
        """Composed P+ = P_1^+ ... P_c^+ applied to a coarsest-level vector."""
        for lv in reversed(self.levels):
            x_c = lift(lv.partition, x_c)
        return x_c

    def pi(self, x):
        return self.lift(self.project(x))

    def pi_comp(self, x):
        return np.asarray(x, dtype=np.float64) - self.pi(x)

    def composed_P(self) -> sp.csr_array:
        P = sparse_P(self.levels[0].partition) if self.levels else sp.eye_array(
            self.graph.n_vertices, format="csr")
        for lv in self.levels[1:]:
            P = sparse_P(lv.partition) @ P
        return sp.csr_array(P)

    def composed_sets(self):
        """Base-graph vertex sets S(r) contracted onto each coarsest vertex."""
        assign = np.arange(self.graph.n_vertices)
        for lv in self.levels:
            assign = lv.partition.assign[assign]
        sets = [[] for _ in range(self.n_coarse)]
        for v, r in enumerate(assign):
            sets[int(r)].append(v)
        return [tuple(s) for s in sets]


def compose_project(h: Hierarchy, x):
    return h.project(x)


def compose_lift(h: Hierarchy, x_c):
    return h.lift(x_c)


def quadratic_form_preservation_check(h: Hierarchy, x):
    """Return (x_c' L_c x_c, lifted' L lifted); equal for consistent coarsening."""
    x = np.asarray(x, dtype=np.float64)
    x_c = h.project(x)
    lifted = h.lift(x_c)
    L_c = h.coarsest_laplacian
    L = h.base_laplacian
    return float(x_c @ (L_c @ x_c)), float(lifted @ (L @ lifted))


class Gammas(NamedTuple):
    gamma1: float
    gamma2: float
    exact: bool


def interlacing_gammas(h: Hierarchy) -> Gammas:
    """Interlacing constants: extreme eigenvalues of (P P')^{-1}.

    For a single level these are the min and max contraction-set sizes.
    Multi-level values are exact via the composed P when the base graph is
    small enough; otherwise the product-of-set-sizes bounds are returned with
    ``exact=False``.
    """
    if not h.levels:
        return Gammas(1.0, 1.0, True)
    if h.n_levels == 1:
        sizes = h.levels[0].partition.sizes
        return Gammas(float(sizes.min()), float(sizes.max()), True)
    if h.graph.n_vertices <= DENSE_GUARD:
        P = h.composed_P()
        gram = (P @ P.T).toarray()
        eig = np.linalg.eigvalsh(gram)
        return Gammas(float(1.0 / eig[-1]), float(1.0 / eig[0]), True)
    # bound path: product of per-level set sizes along each vertex's chain
    prod = np.ones(h.graph.n_vertices)
    assign = np.arange(h.graph.n_vertices)
    for lv in h.levels:
        assign = lv.partition.assign[assign]
        prod *= lv.partition.sizes[assign]
    return Gammas(float(prod.min()), float(prod.max()), False)


# ---------------------------------------------------------------------------
# Serialization. The JSON stores partitions and sigmas only; coarse Laplacians
# are recomputed deterministically on load.
# ---------------------------------------------------------------------------

def save_hierarchy(h: Hierarchy, path):
    doc = {
        "version": HIERARCHY_SCHEMA_VERSION,
        "graph_meta": {
            "n_vertices": h.graph.n_vertices,
            "n_edges": h.graph.n_edges,
            **{k: v for k, v in h.graph.meta.items() if isinstance(v, (str, int, float))},
        },
        "levels": [
            {
                "sets": [list(s) for s in lv.partition.sets],
                "sigma": lv.sigma,
                "method": lv.method_tag,
            }
            for lv in h.levels
        ],
        "eps_bound": h.eps_bound,
        "stalled": h.stalled,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_hierarchy(path, graph: WeightedGraph) -> Hierarchy:
    """Rebuild a hierarchy against its base graph, re-deriving coarse Laplacians.

    The stored sigmas are metadata; partitions are revalidated and the
    eps bound is checked against them.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != HIERARCHY_SCHEMA_VERSION:
        raise HierarchyFormatError(
            f"unsupported hierarchy schema version {doc.get('version')!r}")
    if doc["graph_meta"]["n_vertices"] != graph.n_vertices:
        raise HierarchyFormatError(
            "hierarchy was built for a graph of "
            f"{doc['graph_meta']['n_vertices']} vertices, got {graph.n_vertices}")
    L = build_laplacian(graph)
    levels = []
    n_cur = graph.n_vertices
    for entry in doc["levels"]:
        try:
            p = Partition(n_cur, tuple(tuple(s) for s in entry["sets"]))
        except ValueError as exc:
            raise HierarchyFormatError(f"invalid partition in file: {exc}") from None
        try:
            L = coarsen_laplacian(L, p)
        except DisconnectedSetError as exc:
            raise HierarchyFormatError(str(exc)) from None
        levels.append(HierarchyLevel(p, L, float(entry["sigma"]), entry.get("method", "")))
        n_cur = p.n_out
    h = Hierarchy(graph, tuple(levels), stalled=bool(doc.get("stalled", False)))
    stored = float(doc.get("eps_bound", 0.0))
    derived = h.eps_bound
    if math.isfinite(stored) and math.isfinite(derived) and abs(stored - derived) > 1e-9 * (1 + abs(derived)):
        raise HierarchyFormatError(
            f"stored eps bound {stored} inconsistent with sigmas (derived {derived})")
    return h


def coarse_graph(h: Hierarchy) -> WeightedGraph:
    """The coarsest level as a weighted graph."""
    return graph_from_laplacian(h.coarsest_laplacian)
