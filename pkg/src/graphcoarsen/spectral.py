"""Eigensolver and measurement suite: restricted approximation constants,
eigenvalue errors, canonical angles, and checked spectral bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarsening import DENSE_GUARD, Hierarchy, interlacing_gammas
from .graph import DisconnectedGraphError

EIG_RESIDUAL_TOL = 1e-8
CONNECTIVITY_TOL = 1e-12


class EigensolverError(RuntimeError):
    """The sparse eigensolver failed to converge within its iteration cap."""


@dataclass(frozen=True)
class EigenBasis:
    """The k smallest eigenpairs of a symmetric PSD matrix."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def k(self):
        return len(self.values)


def smallest_eigenpairs(L, k, enforce_null=True) -> EigenBasis:
    """First k eigenpairs of a Laplacian, smallest eigenvalues first.

    For connected graphs the trivial pair (0, 1/sqrt(N)) is enforced
    analytically. Dense solve below the size guard, shift-invert Lanczos
    above it.
    """
    n = L.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds dimension {n}")
    # dense eigh costs n^3 regardless of k; Lanczos wins once n is in the
    # hundreds provided it only needs a small fraction of the spectrum
    if n <= 512 or k > n // 4:
        dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
        vals, vecs = np.linalg.eigh(dense)
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        vals, vecs = _sparse_smallest(L, k)
    vals = vals.copy()
    vecs = vecs.copy()
    if enforce_null and abs(vals[0]) <= 1e-8:
        vals[0] = 0.0
        const = np.full(n, 1.0 / np.sqrt(n))
        vecs[:, 0] = const
        # re-orthogonalize the remaining columns against the exact nullvector
        for i in range(1, k):
            vecs[:, i] -= const * (const @ vecs[:, i])
            vecs[:, i] /= np.linalg.norm(vecs[:, i])
    res = np.linalg.norm(L @ vecs - vecs * vals, axis=0)
    res /= np.linalg.norm(vecs, axis=0)
    return EigenBasis(vals, vecs, res)


def _sparse_smallest(L, k):
    """Smallest eigenpairs of a large sparse Laplacian.

    Plain Lanczos on the smallest-algebraic end first; each iteration is
    linear in edges and it converges quickly even when the low spectrum is
    clustered. Shift-invert is the fallback, paying an LU factorization whose
    fill is cheap on mesh-like graphs but heavy on expanders.
    """
    csc = sp.csc_array(L, dtype=np.float64)
    try:
        vals, vecs = spla.eigsh(csc, k=k, which="SA",
                                ncv=min(L.shape[0], max(2 * k + 1, 60)),
                                maxiter=2000, tol=1e-8)
        order = np.argsort(vals)
        return vals[order], vecs[:, order]
    except spla.ArpackNoConvergence:
        pass
    scale = float(np.max(L.diagonal())) or 1.0
    try:
        vals, vecs = spla.eigsh(csc, k=k, sigma=-1e-3 * scale, which="LM",
                                maxiter=5000, tol=1e-10)
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(str(exc)) from None
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _check_connected(eig: EigenBasis):
    if eig.k >= 2 and eig.values[1] <= CONNECTIVITY_TOL:
        raise DisconnectedGraphError(
            "graph is disconnected (or numerically so): lambda_2 <= 1e-12")


def _lnorm_sq(L, Y):
    """Columnwise Gram Y' L Y; its top eigenvalue is ||S Y||_2^2."""
    Y = np.atleast_2d(Y.T).T
    G = Y.T @ (L @ Y)
    return G


def _spectral_norm_L(L, Y):
    G = _lnorm_sq(L, Y)
    top = np.linalg.eigvalsh((G + G.T) / 2)[-1]
    return float(np.sqrt(max(top, 0.0)))


def _scaled_eigenbasis(eig: EigenBasis):
    """U_k Lambda_k^{+1/2}: columns u_i / sqrt(lambda_i), zero for lambda = 0."""
    inv = np.where(eig.values > 1e-12, 1.0 / np.sqrt(np.maximum(eig.values, 1e-300)), 0.0)
    return eig.vectors * inv


def restricted_epsilon(L, h: Hierarchy, k, eig: EigenBasis = None) -> float:
    """Smallest eps such that ||x - Pi x||_L <= eps ||x||_L on span(U_k).

    Closed form: the largest singular value of S Pi_comp U_k Lambda_k^{+1/2}.
    """
    if eig is None:
        eig = smallest_eigenpairs(L, k)
    if k >= 2:
        _check_connected(eig)
    B = _scaled_eigenbasis(eig)[:, :k]
    return _spectral_norm_L(L, h.pi_comp(B))


def restricted_epsilon_profile(L, h: Hierarchy, k, eig: EigenBasis = None):
    """eps_i for the nested subspaces span(U_1), ..., span(U_k)."""
    if eig is None:
        eig = smallest_eigenpairs(L, k)
    if k >= 2:
        _check_connected(eig)
    Y = h.pi_comp(_scaled_eigenbasis(eig)[:, :k])
    G = _lnorm_sq(L, Y)
    G = (G + G.T) / 2
    out = np.empty(k)
    for i in range(1, k + 1):
        top = np.linalg.eigvalsh(G[:i, :i])[-1]
        out[i - 1] = np.sqrt(max(top, 0.0))
    return out


@dataclass(frozen=True)
class Report:
    """Outcome of a checked inequality."""

    ok: bool
    skipped: str = None
    max_violation: float = 0.0
    detail: dict = field(default_factory=dict)


def check_corollary_isometry(L, h: Hierarchy, k, trials=100, seed=0) -> Report:
    """Restricted isometry: (1-eps)||x||_L <= ||x_c||_{L_c} <= (1+eps)||x||_L
    for x in span(U_k)."""
    eig = smallest_eigenpairs(L, k)
    eps = restricted_epsilon(L, h, k, eig=eig)
    L_c = h.coarsest_laplacian
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = eig.vectors @ rng.standard_normal(k)
        nx = np.sqrt(max(float(x @ (L @ x)), 0.0))
        x_c = h.project(x)
        nc = np.sqrt(max(float(x_c @ (L_c @ x_c)), 0.0))
        worst = max(worst, (1 - eps) * nx - nc, nc - (1 + eps) * nx)
    return Report(ok=worst <= 1e-9, max_violation=worst, detail={"epsilon": eps})


def eigenvalue_error(L, L_c, k) -> float:
    """Mean relative error of the first k eigenvalues.

    The i=1 term is defined as 0: both eigenvalues are analytically zero.
    """
    lam = smallest_eigenpairs(L, k).values
    lam_c = smallest_eigenpairs(L_c, k).values
    terms = np.zeros(k)
    for i in range(1, k):
        terms[i] = abs(lam_c[i] - lam[i]) / lam[i]
    return float(terms.mean())


def check_theorem_interlacing(L, h: Hierarchy, k=None) -> Report:
    """gamma_1 lam_k <= coarse lam_k <= gamma_2 lam_{k+N-n} for all k <= n."""
    n = h.n_coarse
    N = h.graph.n_vertices
    k = n if k is None else k
    lam = smallest_eigenpairs(L, N).values
    lam_c = smallest_eigenpairs(h.coarsest_laplacian, n).values
    g = interlacing_gammas(h)
    worst = 0.0
    for i in range(k):
        lo = g.gamma1 * lam[i]
        hi = g.gamma2 * lam[i + N - n]
        worst = max(worst, lo - lam_c[i], lam_c[i] - hi)
    return Report(ok=worst <= 1e-9, max_violation=worst,
                  detail={"gamma1": g.gamma1, "gamma2": g.gamma2, "exact": g.exact})


def check_theorem_eigenvalues(L, h: Hierarchy, k) -> Report:
    """Eigenvalue bound under restricted similarity, valid when
    eps_k^2 < lambda_2 / lambda_k."""
    eig = smallest_eigenpairs(L, max(k, 2))
    lam = eig.values
    if lam[1] <= CONNECTIVITY_TOL:
        return Report(ok=True, skipped="disconnected graph")
    eps_k = restricted_epsilon(L, h, k, eig=eig)
    if lam[k - 1] > 0 and eps_k ** 2 >= lam[1] / lam[k - 1]:
        return Report(ok=True, skipped="precondition unmet", detail={"eps_k": eps_k})
    if k > h.n_coarse:
        return Report(ok=True, skipped="k exceeds coarse size")
    lam_c = smallest_eigenpairs(h.coarsest_laplacian, k).values
    g = interlacing_gammas(h)
    lo = g.gamma1 * lam[k - 1]
    denom = 1.0 - eps_k ** 2 * (lam[k - 1] / lam[1])
    hi = g.gamma2 * (1 + eps_k) ** 2 * lam[k - 1] / denom
    worst = max(lo - lam_c[k - 1], lam_c[k - 1] - hi)
    return Report(ok=worst <= 1e-9, max_violation=worst,
                  detail={"eps_k": eps_k, "lower": lo, "upper": hi,
                          "coarse_value": float(lam_c[k - 1])})


def sin_theta_frobenius(L, h: Hierarchy, k) -> float:
    """Squared Frobenius norm of the sines of the canonical angles between
    U_k and the lifted coarse eigenspace, via sum_{i<=k, j>k} (u'_j P u_i)^2.

    Worked with squared sines directly; no arccos involved.
    """
    n = h.n_coarse
    if k > n:
        raise ValueError(f"k={k} exceeds coarse size {n}")
    U_k = smallest_eigenpairs(L, k).vectors
    U_c = smallest_eigenpairs(h.coarsest_laplacian, n).vectors
    PU = h.project(U_k)                      # n x k
    inner = U_c.T @ PU                       # n x k, row j = u'_j . P u_i
    return float(np.sum(inner[k:, :] ** 2))


def check_theorem_sintheta(L, h: Hierarchy, k) -> Report:
    """sin-Theta bound from restricted similarity; skipped on a zero gap."""
    eig = smallest_eigenpairs(L, k + 1)
    lam = eig.values
    if lam[1] <= CONNECTIVITY_TOL:
        return Report(ok=True, skipped="disconnected graph")
    gap = lam[k] - lam[k - 1]
    if gap <= 1e-10:
        return Report(ok=True, skipped="zero spectral gap")
    eps = restricted_epsilon_profile(L, h, k, eig=eig)
    g = interlacing_gammas(h)
    bound = (np.sum(lam[:k] * ((1 + eps) ** 2 / g.gamma1 - 1)) +
             lam[k - 1] * np.sum(eps)) / gap
    measured = sin_theta_frobenius(L, h, k)
    return Report(ok=measured <= bound + 1e-9,
                  max_violation=max(0.0, measured - bound),
                  detail={"measured": measured, "bound": float(bound)})


def lift_lengths_lemma_check(L, h: Hierarchy, k) -> Report:
    """u_i' (I - Pi) u_i <= eps_i for all i <= k with eps_i <= 1.

    For a single level the projection is orthogonal and the left side equals
    ||u_i - Pi u_i||_2^2; with several levels the composed projection is
    oblique and only the quadratic form obeys the bound. The bound is derived
    by squaring the near-isometry factor (1 - eps_i), which is only valid
    while that factor is nonnegative; indices with eps_i > 1 are excluded,
    and the check is skipped if none remain."""
    eig = smallest_eigenpairs(L, k)
    eps = restricted_epsilon_profile(L, h, k, eig=eig)
    worst = 0.0
    checked = 0
    for i in range(k):
        if eps[i] > 1.0:
            continue
        u = eig.vectors[:, i]
        worst = max(worst, float(u @ h.pi_comp(u)) - eps[i])
        checked += 1
    if checked == 0:
        return Report(ok=True, skipped="restricted constants exceed one")
    return Report(ok=worst <= 1e-9, max_violation=worst,
                  detail={"checked": checked})


def kmeans_cost(X, clusters) -> float:
    """k-means cost of an embedding under a given clustering:
    sum over clusters of pairwise squared distances over twice the size."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64).T).T
    if hasattr(clusters, "sets"):
        clusters = clusters.sets
    total = 0.0
    for members in clusters:
        idx = np.asarray(list(members))
        pts = X[idx]
        mu = pts.mean(axis=0)
        total += float(np.sum((pts - mu) ** 2))
    return total
