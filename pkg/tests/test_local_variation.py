import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcoarsen import (Partition, build_laplacian, coarsen_level,
                          coarsen_multilevel, restricted_epsilon)
from graphcoarsen.local_variation import (SubspaceBasis, _pseudo_sqrt_inv,
                                          advance_basis, edge_costs,
                                          edge_family, explicit_basis,
                                          initial_basis, local_laplacian,
                                          local_projection_comp,
                                          local_variation_cost,
                                          neighborhood_family)
from .conftest import random_connected_graph
from .oracles import (dense_local_laplacian, dense_local_variation_cost,
                      dense_variation_sigma, dense_pi)


def test_pseudo_sqrt_inverse():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 3))
    G = X @ X.T  # rank 3 PSD
    R = _pseudo_sqrt_inv(G)
    # R G R should be the orthogonal projector onto range(G)
    proj = R @ G @ R
    assert np.allclose(proj @ proj, proj, atol=1e-8)
    assert np.linalg.matrix_rank(proj, tol=1e-8) == 3


def test_initial_basis_p3(p3_graph):
    L = build_laplacian(p3_graph)
    b = initial_basis(L, 2)
    assert b.k == 2
    # first column is the zeroed null direction
    assert np.allclose(b.B[:, 0], 0.0)
    # second column is u_2 / sqrt(lambda_2), lambda_2 = 1
    assert np.allclose(np.abs(b.B[:, 1]),
                       np.abs(np.array([1, 0, -1]) / np.sqrt(2)), atol=1e-9)


def test_explicit_basis_matches_eigenspace(p3_graph):
    L = build_laplacian(p3_graph)
    vals, vecs = np.linalg.eigh(L.toarray())
    b_eig = initial_basis(L, 2)
    b_exp = explicit_basis(L, vecs[:, :2])
    # same column space and same L-norm behavior
    sig_eig = dense_variation_sigma(L.toarray(), dense_pi([(0, 1), (2,)], 3),
                                    b_eig.A)
    sig_exp = dense_variation_sigma(L.toarray(), dense_pi([(0, 1), (2,)], 3),
                                    b_exp.A)
    assert sig_eig == pytest.approx(sig_exp, abs=1e-9)


def test_local_laplacian_boundary_doubled(rng):
    g = random_connected_graph(rng, 12)
    L = build_laplacian(g)
    members = (0, 1, 2)
    local = local_laplacian(L, members).toarray()
    oracle = dense_local_laplacian(list(g.edges()), members, 12)
    assert np.allclose(local, oracle, atol=1e-12)


def test_local_projection_comp(rng):
    x = rng.standard_normal(6)
    out = local_projection_comp((1, 3), x)
    assert out[0] == 0.0 and out[2] == 0.0
    assert out[1] == pytest.approx(x[1] - (x[1] + x[3]) / 2)
    assert out[1] + out[3] == pytest.approx(0.0, abs=1e-12)


def test_p3_pair_cost(p3_graph):
    L = build_laplacian(p3_graph)
    b = initial_basis(L, 2)
    assert local_variation_cost((0, 1), b.A, L) == pytest.approx(0.75, abs=1e-9)


def test_cost_matches_dense_oracle(rng):
    for _ in range(30):
        n = int(rng.integers(4, 20))
        g = random_connected_graph(rng, n)
        L = build_laplacian(g)
        k = int(rng.integers(2, min(6, n) + 1))
        b = initial_basis(L, k)
        size = int(rng.integers(2, min(5, n) + 1))
        members = tuple(rng.choice(n, size=size, replace=False).tolist())
        got = local_variation_cost(members, b.A, L)
        want = dense_local_variation_cost(g, members, b.A)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_edge_costs_match_general_path(rng):
    g = random_connected_graph(rng, 15)
    L = build_laplacian(g)
    b = initial_basis(L, 4)
    deg = np.asarray(L.diagonal()).ravel()
    src, dst = g.src, g.dst
    fast = edge_costs((src, dst), deg, b.A)
    for e in range(g.n_edges):
        slow = local_variation_cost((int(src[e]), int(dst[e])), b.A, L)
        assert fast[e] == pytest.approx(slow, rel=1e-9, abs=1e-12)


def test_families(rng):
    g = random_connected_graph(rng, 10)
    L = build_laplacian(g)
    b = initial_basis(L, 3)
    fam = edge_family(L, b.A)
    assert len(fam) == g.n_edges
    nfam = neighborhood_family(L, b.A)
    assert len(nfam) == 10
    # heap pops in nondecreasing cost order
    costs = [fam.pop()[0] for _ in range(len(fam))]
    assert costs == sorted(costs)


def test_coarsen_level_respects_target(rng):
    g = random_connected_graph(rng, 20)
    L = build_laplacian(g)
    b = initial_basis(L, 4)
    p, L_next, sigma = coarsen_level(L, b, math.inf, 10)
    assert p.n_out >= 10
    assert L_next.shape == (p.n_out, p.n_out)
    assert sigma >= 0.0
    p.validate_connected(L)


def test_coarsen_level_zero_budget_stalls(rng):
    g = random_connected_graph(rng, 10)
    L = build_laplacian(g)
    b = initial_basis(L, 3)
    p, _, sigma = coarsen_level(L, b, 0.0, 1)
    # nothing fits a zero budget unless a candidate costs exactly zero
    assert sigma == 0.0


def test_sigma_matches_accumulated_costs(rng):
    g = random_connected_graph(rng, 15)
    L = build_laplacian(g)
    b = initial_basis(L, 3)
    p, _, sigma = coarsen_level(L, b, math.inf, 5)
    total = sum((len(s) - 1) * local_variation_cost(s, b.A, L)
                for s in p.sets if len(s) > 1)
    assert sigma == pytest.approx(math.sqrt(total), rel=1e-9)


def test_multilevel_reaches_target(rng):
    g = random_connected_graph(rng, 40)
    h = coarsen_multilevel(g, k=4, n_target=10)
    assert h.n_coarse <= 12
    assert not h.stalled
    assert all(lv.method_tag == "local-var-edge" for lv in h.levels)


def test_multilevel_neighborhood_family(rng):
    g = random_connected_graph(rng, 30)
    h = coarsen_multilevel(g, k=4, n_target=10, family_kind="neighborhood")
    assert h.n_coarse <= 15
    assert h.levels[0].method_tag == "local-var-neighborhood"


def test_multilevel_eps_budget_respected(rng):
    g = random_connected_graph(rng, 30)
    h = coarsen_multilevel(g, k=4, n_target=1, eps_threshold=0.3)
    assert h.eps_bound <= 0.3 + 1e-9
    L = build_laplacian(g)
    eps = restricted_epsilon(L, h, 4)
    assert eps <= h.eps_bound + 1e-9


def test_multilevel_rejects_bad_args(rng):
    g = random_connected_graph(rng, 10)
    with pytest.raises(ValueError, match="n_target"):
        coarsen_multilevel(g, k=2, n_target=0)
    with pytest.raises(ValueError, match="exactly one"):
        coarsen_multilevel(g, n_target=2)
    with pytest.raises(ValueError, match="exactly one"):
        coarsen_multilevel(g, k=2, basis_vectors=np.eye(10)[:, :2],
                           n_target=2)


def test_multilevel_explicit_basis(rng):
    g = random_connected_graph(rng, 12)
    L = build_laplacian(g)
    vals, vecs = np.linalg.eigh(L.toarray())
    h = coarsen_multilevel(g, basis_vectors=vecs[:, :3], n_target=4)
    assert h.n_coarse <= 6


def test_advance_basis_gram_is_projection(rng):
    g = random_connected_graph(rng, 15)
    L = build_laplacian(g)
    b = initial_basis(L, 4)
    p, L_next, _ = coarsen_level(L, b, math.inf, 6)
    b2 = advance_basis(b, p, L_next)
    G = b2.A.T @ (L_next @ b2.A)
    vals = np.linalg.eigvalsh((G + G.T) / 2)
    assert np.all((np.abs(vals) < 1e-8) | (np.abs(vals - 1.0) < 1e-8))


def test_singleton_cost_rejected(p3_graph):
    L = build_laplacian(p3_graph)
    b = initial_basis(L, 2)
    with pytest.raises(ValueError):
        local_variation_cost((1,), b.A, L)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_prop16_bound_property(seed):
    """Measured restricted epsilon never exceeds the product bound."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 30))
    g = random_connected_graph(rng, n)
    k = int(rng.integers(2, 5))
    h = coarsen_multilevel(g, k=k, n_target=int(rng.integers(2, max(3, n // 3))))
    if not h.levels:
        return
    eps = restricted_epsilon(build_laplacian(g), h, k)
    assert eps <= h.eps_bound + 1e-8
