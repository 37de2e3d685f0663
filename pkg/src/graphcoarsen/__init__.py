"""Multi-level graph coarsening with restricted spectral approximation
guarantees."""

from .baselines import (KronSequence, affinity_cost, algebraic_distance_cost,
                        gauss_seidel_test_vectors, heavy_edge_cost,
                        jacobi_test_vectors, kron_coarsen, kron_reduce,
                        matching_coarsen, run_baseline)
from .coarsening import (DENSE_GUARD, DisconnectedSetError, Gammas, Hierarchy,
                         HierarchyFormatError, HierarchyLevel, Partition,
                         PartitionMismatchError, coarse_graph,
                         coarsen_laplacian, interlacing_gammas, lift,
                         load_hierarchy, pi, pi_comp, project, save_hierarchy,
                         sparse_P, sparse_P_plus)
from .estimators import (AffinityCoarsener, AlgebraicDistanceCoarsener,
                         HeavyEdgeCoarsener, KronReducer,
                         LocalVariationCoarsener)
from .graph import (DisconnectedGraphError, GraphFormatError, WeightedGraph,
                    build_incidence, build_laplacian, connected_components,
                    graph_from_laplacian, is_connected, load_graph,
                    normalized_laplacian, save_graph)
from .local_variation import (SubspaceBasis, advance_basis, coarsen_level,
                              coarsen_multilevel, edge_family, initial_basis,
                              local_variation_cost, neighborhood_family)
from .spectral import (EigenBasis, EigensolverError, Report, eigenvalue_error,
                       kmeans_cost, restricted_epsilon,
                       restricted_epsilon_profile, sin_theta_frobenius,
                       smallest_eigenpairs)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
