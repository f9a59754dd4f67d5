#pragma once

#include "casper/spectral.hpp"
#include "casper/types.hpp"

#include <vector>

namespace casper {

// Consecutive eigenvalues closer than this make the corresponding
// eigenvector directions ambiguous; affected indices are reported instead
// of attempting subspace alignment.
inline constexpr double kSpectrumGapTol = 1e-8;

/// Functional map between the Laplacian eigenbases of two graphs over the
/// same node set: c_ij = <phi_i^a, phi_j^b o T> truncated to the first r
/// eigenvectors. A diagonal map means the two latent geometries agree.
struct FunctionalMap {
  Matrix c;  // r x r, entries in [-1, 1]
};

/// `correspondence[v]` is the node of graph b matched to node v of graph a.
FunctionalMap functional_map(const SpectralDecomposition& dec_a,
                             const SpectralDecomposition& dec_b,
                             const std::vector<int>& correspondence, int r);

/// Off-diagonal energy: sum of |c_ij| over i != j divided by the Frobenius
/// norm of C. Zero for a diagonal map; insensitive to eigenvector signs.
double off_diagonal_energy(const FunctionalMap& map);

struct FmapReport {
  Matrix c_abs;      // r x r, |C|, unthresholded
  Matrix c_display;  // r x r, entries below the threshold zeroed
  double od_e = 0.0;
  std::vector<int> degenerate_a;  // indices i with gap(lambda_i, lambda_{i+1})
  std::vector<int> degenerate_b;  //   below kSpectrumGapTol among the first r
};

/// Full comparison pipeline for two feature snapshots of the same ordered
/// test points: build both k-NN graphs, decompose, map with the identity
/// correspondence, and score. The display matrix zeroes entries below
/// `magnitude_threshold`; od_e always uses the unthresholded magnitudes.
FmapReport fmap_report(const EmbeddingBatch& snapshot_a,
                       const EmbeddingBatch& snapshot_b, int k, int r,
                       double magnitude_threshold);

}  // namespace casper
