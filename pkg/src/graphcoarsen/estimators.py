"""Scikit-learn style transformer wrappers around the reduction methods.

``fit`` builds a reduction of the graph, ``transform`` maps vertex signals
(columns indexed by vertex) to the coarse vertex set, ``inverse_transform``
lifts coarse signals back. Signals are row vectors per sample, one column per
vertex, matching the usual (n_samples, n_features) layout.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import kron_coarsen, matching_coarsen
from .graph import WeightedGraph, graph_from_laplacian
from .local_variation import coarsen_multilevel


def as_graph(X) -> WeightedGraph:
    """Coerce the estimator input to a graph.

    Accepts a :class:`WeightedGraph`, a symmetric sparse adjacency matrix, or
    a square dense adjacency array with zero diagonal.
    """
    if isinstance(X, WeightedGraph):
        return X
    if sp.issparse(X):
        A = sp.csr_array(X)
    else:
        A = sp.csr_array(np.asarray(X, dtype=np.float64))
    if A.shape[0] != A.shape[1]:
        raise ValueError("adjacency matrix must be square")
    diff = A - A.T
    if diff.nnz and abs(diff).max() > 0:
        raise ValueError("adjacency matrix must be symmetric")
    deg = np.asarray(A.sum(axis=1)).ravel()
    L = sp.diags_array(deg) - A
    return graph_from_laplacian(sp.csr_array(L))


class _CoarsenerBase(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing for contraction-based coarseners."""

    def fit(self, X, y=None):
        graph = as_graph(X)
        self.hierarchy_ = self._build(graph)
        self.n_vertices_in_ = graph.n_vertices
        self.n_vertices_out_ = self.hierarchy_.n_coarse
        return self

    def transform(self, X):
        check_is_fitted(self, "hierarchy_")
        X = np.asarray(X, dtype=np.float64)
        one_dim = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_vertices_in_:
            raise ValueError(
                f"expected {self.n_vertices_in_} columns, got {X.shape[1]}")
        out = self.hierarchy_.project(X.T).T
        return out[0] if one_dim else out

    def inverse_transform(self, X):
        check_is_fitted(self, "hierarchy_")
        X = np.asarray(X, dtype=np.float64)
        one_dim = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_vertices_out_:
            raise ValueError(
                f"expected {self.n_vertices_out_} columns, got {X.shape[1]}")
        out = self.hierarchy_.lift(X.T).T
        return out[0] if one_dim else out

    def coarse_laplacian(self):
        check_is_fitted(self, "hierarchy_")
        return self.hierarchy_.coarsest_laplacian


class LocalVariationCoarsener(_CoarsenerBase):
    """Multi-level local variation coarsening preserving a principal
    eigenspace within a restricted approximation budget."""

    def __init__(self, n_target=1, k=10, eps_threshold=math.inf,
                 family="edge"):
        self.n_target = n_target
        self.k = k
        self.eps_threshold = eps_threshold
        self.family = family

    def _build(self, graph):
        return coarsen_multilevel(
            graph, k=min(self.k, graph.n_vertices),
            eps_threshold=self.eps_threshold,
            n_target=self.n_target, family_kind=self.family)


class _MatchingCoarsener(_CoarsenerBase):
    method = None

    def __init__(self, n_target=1, seed=0):
        self.n_target = n_target
        self.seed = seed

    def _build(self, graph):
        return matching_coarsen(graph, self.method, self.n_target,
                                seed=self.seed)


class HeavyEdgeCoarsener(_MatchingCoarsener):
    """Greedy heavy-edge matching coarsener."""

    method = "heavy-edge"


class AlgebraicDistanceCoarsener(_MatchingCoarsener):
    """Matching coarsener scored by algebraic distance of relaxed vectors."""

    method = "algebraic-distance"


class AffinityCoarsener(_MatchingCoarsener):
    """Matching coarsener scored by affinity of relaxed vectors."""

    method = "affinity"


class KronReducer(BaseEstimator):
    """Schur-complement reduction onto eigenvector-selected vertex subsets.

    Not a transformer: the reduction keeps a subset of vertices rather than
    contracting sets, so ``transform`` restricts signals to the kept vertices.
    """

    def __init__(self, n_target=1):
        self.n_target = n_target

    def fit(self, X, y=None):
        graph = as_graph(X)
        self.sequence_ = kron_coarsen(graph, self.n_target)
        self.n_vertices_in_ = graph.n_vertices
        kept = np.arange(graph.n_vertices)
        for keep in self.sequence_.keep_sets:
            kept = kept[np.asarray(keep)]
        self.kept_vertices_ = kept
        return self

    def transform(self, X):
        check_is_fitted(self, "sequence_")
        X = np.asarray(X, dtype=np.float64)
        one_dim = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_vertices_in_:
            raise ValueError(
                f"expected {self.n_vertices_in_} columns, got {X.shape[1]}")
        out = X[:, self.kept_vertices_]
        return out[0] if one_dim else out

    def coarse_laplacian(self):
        check_is_fitted(self, "sequence_")
        return self.sequence_.coarsest_laplacian
