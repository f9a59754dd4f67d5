#pragma once

#include "casper/graph.hpp"
#include "casper/rng.hpp"
#include "casper/types.hpp"

#include <map>
#include <utility>
#include <vector>

namespace casper {

// Consecutive eigenvalues closer than this at the gap index make the loss
// non-smooth; results are then flagged and carry a subgradient.
inline constexpr double kDegeneracyTol = 1e-10;

/// Full eigendecomposition of a symmetric matrix: eigenvalues ascending,
/// eigenvector columns orthonormal. Signs follow a fixed convention (the
/// largest-magnitude entry of each vector is positive, ties resolved toward
/// the lower index) so repeated runs are bit-identical.
struct SpectralDecomposition {
  Vector eigenvalues;   // size n, ascending
  Matrix eigenvectors;  // n x n, column j pairs with eigenvalues(j)
};

SpectralDecomposition eigh(const Matrix& symmetric);
SpectralDecomposition eigh(const Laplacian& laplacian);

/// Eigengap regularizer on an ascending spectrum:
///   loss = -lambda_{g+1} + sum_{j<=g} lambda_j.
/// Minimizing widens the gap after the g-th eigenvalue while flattening the
/// first g, which pushes the graph toward g loosely connected partitions.
double casper_loss(const Vector& ascending_eigenvalues, int g);

/// Hyperparameters of the spectral regularizer.
struct CasperConfig {
  double rho = 0.5;    // loss weight in the training objective
  int p = 4;           // classes per sampled sub-graph
  int t = 8;           // exemplars per class
  int mc_samples = 2;  // sub-graphs averaged per step
  int k = 5;           // k-NN parameter of the latent geometry graph

  void validate() const;
};

/// Loss and feature gradient of the full pipeline
///   features -> k-NN graph -> normalized Laplacian -> eigengap loss.
/// The k-NN edge selection is constant under differentiation; edge weights,
/// degrees and eigenvalues all carry gradient. `degenerate` marks spectra
/// whose gap-adjacent eigenvalues coincide within kDegeneracyTol, in which
/// case `feature_grad` is the subgradient under the fixed sign convention.
struct EigengapResult {
  double loss = 0.0;
  Matrix feature_grad;  // n x d
  bool degenerate = false;
};

EigengapResult casper_loss_and_grad(const Matrix& features,
                                    const std::vector<int>& labels, int k,
                                    int g);

/// The same composed loss with the edge set pinned to `edges` instead of
/// re-selected from the features. This is what central finite differences
/// probe; at the evaluation point it coincides with the composed loss.
double eigengap_loss_frozen(const Matrix& features,
                            const std::vector<std::pair<int, int>>& edges,
                            int g);

/// (class id, position within that class's exemplar list).
using ExemplarKey = std::pair<int, int>;

/// Monte Carlo estimate of the buffer-wide eigengap loss: mc_samples
/// sub-graphs, each spanning p uniformly chosen classes with t exemplars
/// drawn without replacement, evaluated with the gap enforced at p.
/// Gradients accumulate per exemplar with weight 1 / mc_samples.
struct BatchEigengapResult {
  double loss = 0.0;
  std::map<ExemplarKey, Eigen::RowVectorXd> exemplar_grads;
  bool any_degenerate = false;
};

BatchEigengapResult casper_batch_loss(
    const std::map<int, std::vector<Eigen::RowVectorXd>>& features_by_class,
    const CasperConfig& cfg, Rng& rng);

}  // namespace casper
