import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcoarsen import (DisconnectedSetError, Hierarchy, HierarchyFormatError,
                          HierarchyLevel, Partition, coarsen_laplacian,
                          interlacing_gammas, lift, load_hierarchy, pi, pi_comp,
                          project, save_hierarchy)
from graphcoarsen.coarsening import (PartitionMismatchError, dense_P,
                                     dense_P_plus,
                                     quadratic_form_preservation_check,
                                     sparse_P, sparse_P_plus)
from graphcoarsen.graph import build_laplacian
from .conftest import (random_connected_graph, random_connected_partition,
                       random_hierarchy)
from .oracles import brute_force_cut_weight, dense_laplacian, dense_reduce


def test_partition_validation():
    with pytest.raises(ValueError, match="overlap"):
        Partition(3, ((0, 1), (1, 2)))
    with pytest.raises(ValueError, match="cover"):
        Partition(3, ((0, 1),))
    with pytest.raises(PartitionMismatchError):
        Partition(3, ((0, 1), (2, 5)))
    with pytest.raises(ValueError, match="empty"):
        Partition(2, ((0, 1), ()))


def test_partition_from_assign_round_trip():
    p = Partition(5, ((0, 2), (1,), (3, 4)))
    q = Partition.from_assign(p.assign)
    assert q.sets == p.sets
    assert Partition.identity(3).is_identity()


def test_project_and_lift_match_dense_operators(rng):
    for _ in range(20):
        g = random_connected_graph(rng, int(rng.integers(3, 25)))
        p = random_connected_partition(rng, g, int(rng.integers(1, g.n_vertices)))
        x = rng.standard_normal(g.n_vertices)
        P = dense_P(p)
        P_plus = dense_P_plus(p)
        assert np.allclose(project(p, x), P @ x, atol=1e-12)
        assert np.allclose(lift(p, project(p, x)), P_plus @ (P @ x), atol=1e-12)
        assert np.allclose(pi(p, x) + pi_comp(p, x), x, atol=1e-12)


def test_pseudo_inverse_identity(rng):
    # P+ equals the Moore-Penrose pseudo-inverse of P
    g = random_connected_graph(rng, 12)
    p = random_connected_partition(rng, g, 5)
    P = dense_P(p)
    assert np.allclose(dense_P_plus(p), np.linalg.pinv(P), atol=1e-10)


def test_rows_normalize_exactly(rng):
    g = random_connected_graph(rng, 15)
    p = random_connected_partition(rng, g, 6)
    ones_c = sparse_P(p) @ np.ones(15)
    assert np.allclose(ones_c, 1.0, atol=1e-15)
    assert np.all(sparse_P_plus(p) @ np.ones(p.n_out) == 1.0)


def test_pi_idempotent(rng):
    g = random_connected_graph(rng, 20)
    p = random_connected_partition(rng, g, 7)
    x = rng.standard_normal(20)
    assert np.allclose(pi(p, pi(p, x)), pi(p, x), atol=1e-12)


def test_coarsen_laplacian_matches_dense_oracle(rng):
    for _ in range(30):
        g = random_connected_graph(rng, int(rng.integers(3, 30)))
        p = random_connected_partition(rng, g, int(rng.integers(1, g.n_vertices)))
        L = build_laplacian(g)
        fast = coarsen_laplacian(L, p).toarray()
        oracle = dense_reduce(dense_laplacian(g), dense_P(p))
        assert np.allclose(fast, oracle, atol=1e-10)


def test_coarse_laplacian_is_laplacian(rng):
    g = random_connected_graph(rng, 20)
    p = random_connected_partition(rng, g, 8)
    L_c = coarsen_laplacian(build_laplacian(g), p).toarray()
    assert np.all(L_c @ np.ones(8) == 0.0)
    assert np.linalg.eigvalsh(L_c)[0] > -1e-10
    off = L_c - np.diag(np.diag(L_c))
    assert np.all(off <= 0.0)


def test_cut_preservation_exact(rng):
    g = random_connected_graph(rng, 15)
    p = random_connected_partition(rng, g, 5)
    L_c = coarsen_laplacian(build_laplacian(g), p).toarray()
    for r in range(p.n_out):
        for q in range(r + 1, p.n_out):
            assert -L_c[r, q] == brute_force_cut_weight(
                g, p.sets[r], p.sets[q])


def test_disconnected_set_rejected():
    g = random_connected_graph(np.random.default_rng(3), 6, extra_edges=0)
    # find two vertices with no edge between them
    present = {(i, j) for i, j, _ in g.edges()}
    pair = next((i, j) for i in range(6) for j in range(i + 1, 6)
                if (i, j) not in present)
    rest = tuple((v,) for v in range(6) if v not in pair)
    p = Partition(6, (tuple(pair),) + rest)
    with pytest.raises(DisconnectedSetError):
        coarsen_laplacian(build_laplacian(g), p)


def test_quadratic_form_preserved(rng):
    g = random_connected_graph(rng, 18)
    h = random_hierarchy(rng, g)
    for _ in range(10):
        x = rng.standard_normal(18)
        lhs, rhs = quadratic_form_preservation_check(h, x)
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_hierarchy_sizes_strictly_decrease(rng):
    g = random_connected_graph(rng, 10)
    L = build_laplacian(g)
    ident = Partition.identity(10)
    with pytest.raises(ValueError, match="decrease"):
        Hierarchy(g, (HierarchyLevel(ident, L, 0.0),))


def test_composed_operators_match_per_level(rng):
    g = random_connected_graph(rng, 20)
    h = random_hierarchy(rng, g, n_levels=3)
    x = rng.standard_normal(20)
    P = h.composed_P().toarray()
    assert np.allclose(h.project(x), P @ x, atol=1e-12)
    # P P+ is the coarse identity, so the composed Pi is idempotent even
    # though for several levels it is an oblique projection
    P_plus = np.column_stack([h.lift(e) for e in np.eye(h.n_coarse)])
    assert np.allclose(P @ P_plus, np.eye(h.n_coarse), atol=1e-12)
    assert np.allclose(h.pi(h.pi(x)), h.pi(x), atol=1e-12)


def test_composed_sets_cover(rng):
    g = random_connected_graph(rng, 15)
    h = random_hierarchy(rng, g)
    sets = h.composed_sets()
    assert sorted(v for s in sets for v in s) == list(range(15))
    assert len(sets) == h.n_coarse


def test_gammas_single_level(rng):
    g = random_connected_graph(rng, 12)
    p = random_connected_partition(rng, g, 5)
    L = build_laplacian(g)
    h = Hierarchy(g, (HierarchyLevel(p, coarsen_laplacian(L, p), 0.0),))
    gam = interlacing_gammas(h)
    assert gam.exact
    assert gam.gamma1 == float(p.sizes.min())
    assert gam.gamma2 == float(p.sizes.max())


def test_gammas_multilevel_exact_from_composed_P(rng):
    g = random_connected_graph(rng, 18)
    h = random_hierarchy(rng, g, n_levels=3)
    gam = interlacing_gammas(h)
    assert gam.exact
    P = h.composed_P().toarray()
    eig = np.linalg.eigvalsh(P @ P.T)
    assert gam.gamma1 == pytest.approx(1.0 / eig[-1], abs=1e-10)
    assert gam.gamma2 == pytest.approx(1.0 / eig[0], abs=1e-10)


def test_identity_hierarchy_gammas(rng):
    g = random_connected_graph(rng, 5)
    h = Hierarchy(g, ())
    assert interlacing_gammas(h) == (1.0, 1.0, True)


def test_hierarchy_round_trip(tmp_path, rng):
    g = random_connected_graph(rng, 16)
    h = random_hierarchy(rng, g, n_levels=2)
    path = tmp_path / "h.json"
    save_hierarchy(h, path)
    h2 = load_hierarchy(path, g)
    assert h2.n_levels == h.n_levels
    for a, b in zip(h.levels, h2.levels):
        assert a.partition.sets == b.partition.sets
        assert np.allclose(a.laplacian.toarray(), b.laplacian.toarray(),
                           atol=1e-12)


def test_hierarchy_version_check(tmp_path, rng):
    g = random_connected_graph(rng, 8)
    h = random_hierarchy(rng, g, n_levels=1)
    path = tmp_path / "h.json"
    save_hierarchy(h, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(HierarchyFormatError, match="version"):
        load_hierarchy(path, g)


def test_hierarchy_wrong_graph_rejected(tmp_path, rng):
    g = random_connected_graph(rng, 8)
    h = random_hierarchy(rng, g, n_levels=1)
    path = tmp_path / "h.json"
    save_hierarchy(h, path)
    other = random_connected_graph(rng, 9)
    with pytest.raises(HierarchyFormatError, match="vertices"):
        load_hierarchy(path, other)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(3, 30))
def test_projection_properties(seed, n):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n)
    p = random_connected_partition(rng, g, int(rng.integers(1, n)))
    x = rng.standard_normal(n)
    # Pi is a projection; complement annihilates it
    assert np.allclose(pi(p, pi(p, x)), pi(p, x), atol=1e-10)
    assert np.allclose(pi_comp(p, pi(p, x)), 0.0, atol=1e-10)
    # projecting preserves per-set totals
    sizes = p.sizes.astype(float)
    assert np.allclose(project(p, x) * sizes,
                       np.bincount(p.assign, weights=x, minlength=p.n_out),
                       atol=1e-10)
