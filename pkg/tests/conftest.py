"""Shared randomized-instance builders.

Weights are drawn from dyadic rationals (multiples of 1/16) so that sums of
a few of them are exact in floating point; several invariants are asserted
with equality rather than tolerances.
"""

import numpy as np
import pytest

from graphcoarsen import Hierarchy, HierarchyLevel, Partition, WeightedGraph
from graphcoarsen.coarsening import coarsen_laplacian
from graphcoarsen.graph import build_laplacian


def dyadic_weights(rng, size):
    return rng.integers(1, 33, size=size) / 16.0


def random_connected_graph(rng, n, extra_edges=None) -> WeightedGraph:
    """Random connected graph: random spanning tree plus extra edges."""
    if n == 1:
        return WeightedGraph(1, [], [], [])
    src = list(range(1, n))
    dst = [int(rng.integers(0, v)) for v in range(1, n)]
    have = {(min(a, b), max(a, b)) for a, b in zip(src, dst)}
    if extra_edges is None:
        extra_edges = int(rng.integers(0, n))
    tries = 0
    while extra_edges > 0 and tries < 20 * extra_edges + 20:
        tries += 1
        a, b = rng.integers(0, n, size=2)
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if a == b or key in have:
            continue
        have.add(key)
        src.append(key[1])
        dst.append(key[0])
        extra_edges -= 1
    return WeightedGraph(n, src, dst, dyadic_weights(rng, len(src)))


def random_connected_partition(rng, graph, n_out) -> Partition:
    """Random partition with connected contraction sets, via random
    contractions of edges crossing distinct sets (union-find)."""
    n = graph.n_vertices
    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    edges = list(zip(graph.src.tolist(), graph.dst.tolist()))
    rng.shuffle(edges)
    groups = n
    for i, j in edges:
        if groups <= n_out:
            break
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            groups -= 1
    roots = {}
    assign = np.empty(n, dtype=np.int64)
    for v in range(n):
        r = find(v)
        assign[v] = roots.setdefault(r, len(roots))
    return Partition.from_assign(assign)


def random_hierarchy(rng, graph, n_levels=None, method_tag="test") -> Hierarchy:
    """Random multi-level hierarchy with connected contraction sets."""
    if n_levels is None:
        n_levels = int(rng.integers(1, 4))
    L = build_laplacian(graph)
    levels = []
    n_cur = graph.n_vertices
    for _ in range(n_levels):
        if n_cur <= 2:
            break
        n_out = int(rng.integers(max(1, n_cur // 3), n_cur))
        p = random_connected_partition(rng, _as_graph(L), n_out)
        if p.is_identity():
            continue
        L = coarsen_laplacian(L, p)
        levels.append(HierarchyLevel(p, L, float("nan"), method_tag))
        n_cur = p.n_out
    return Hierarchy(graph, tuple(levels))


def _as_graph(L):
    from graphcoarsen.graph import graph_from_laplacian

    return graph_from_laplacian(L)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def p3_graph():
    """Unit-weight path on three vertices."""
    return WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def toy_graph():
    """Five-vertex example: a triangle with two pendant vertices hanging off
    one corner."""
    return WeightedGraph.from_edges(
        5, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0), (2, 4, 1.0)])
