#pragma once

#include "casper/types.hpp"

#include <utility>
#include <vector>

namespace casper {

// Edge-weight floor: keeps every retained edge strictly positive so node
// degrees stay bounded away from zero and the weight stays differentiable
// where the cosine is informative.
inline constexpr double kWeightFloor = 1e-6;

// Norm floor used inside the cosine, guarding zero feature rows.
inline constexpr double kNormFloor = 1e-12;

/// Symmetric weighted adjacency over latent points, weights in [0, 1],
/// zero diagonal. The spectral machinery and the class-separation
/// diagnostics all read this structure.
struct LatentGraph {
  Matrix adjacency;         // n x n
  std::vector<int> labels;  // size n

  int size() const { return static_cast<int>(adjacency.rows()); }
};

/// Normalized graph Laplacian L = I - D^{-1/2} A D^{-1/2} together with the
/// degree vector (row sums of A). Spectrum lies in [0, 2].
struct Laplacian {
  Matrix matrix;   // n x n, exactly symmetric
  Vector degrees;  // size n, non-negative
};

/// Checks LatentGraph invariants: exact symmetry, zero diagonal, weights
/// in [0, 1], labels matching the node count.
void validate_graph(const LatentGraph& g);

/// Pairwise cosine similarities of the rows of `features`, with row norms
/// floored at kNormFloor. Diagonal entries are whatever the formula gives
/// (callers exclude self pairs).
Matrix cosine_matrix(const Matrix& features);

/// Builds the k-NN latent geometry graph: every node links to its k most
/// cosine-similar neighbours (ties broken toward the lower index), edge
/// weight max(kWeightFloor, cosine) capped at 1, and the directed selection
/// is union-symmetrized A = max(W, W^T).
LatentGraph build_knn_graph(const EmbeddingBatch& batch, int k);

/// L = I - D^{-1/2} A D^{-1/2}. Nodes of degree zero take D^{-1/2} = 0 and
/// contribute an identity row/column. The result is symmetrized exactly via
/// (L + L^T) / 2.
Laplacian normalized_laplacian(const LatentGraph& g);

/// Number of connected components of the subgraph keeping edges with weight
/// strictly greater than `threshold` (union-find).
int connected_components(const LatentGraph& g, double threshold);

/// Undirected edge list {i < j : a_ij > 0}, ordered lexicographically.
std::vector<std::pair<int, int>> edge_list(const LatentGraph& g);

}  // namespace casper
