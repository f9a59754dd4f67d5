#include "casper/fmap.hpp"

#include <algorithm>
#include <cmath>

namespace casper {

FunctionalMap functional_map(const SpectralDecomposition& dec_a,
                             const SpectralDecomposition& dec_b,
                             const std::vector<int>& correspondence, int r) {
  const int n = static_cast<int>(dec_a.eigenvectors.rows());
  if (dec_b.eigenvectors.rows() != n) {
    throw InvalidInput("functional map requires equal node counts");
  }
  if (static_cast<int>(correspondence.size()) != n) {
    throw InvalidInput("correspondence size does not match node count");
  }
  std::vector<bool> seen(n, false);
  for (int target : correspondence) {
    if (target < 0 || target >= n || seen[target]) {
      throw InvalidInput("correspondence is not a permutation");
    }
    seen[target] = true;
  }
  if (r < 1 || r > n) {
    throw InvalidParameter("r must satisfy 1 <= r <= n");
  }

  // c_ij = sum_v phi_i^a(v) * phi_j^b(T(v)).
  Matrix permuted_b(n, r);
  for (int v = 0; v < n; ++v) {
    permuted_b.row(v) = dec_b.eigenvectors.row(correspondence[v]).head(r);
  }
  FunctionalMap map;
  map.c = dec_a.eigenvectors.leftCols(r).transpose() * permuted_b;
  return map;
}

double off_diagonal_energy(const FunctionalMap& map) {
  const double frob = map.c.norm();
  if (frob == 0.0) throw InvalidInput("functional map is identically zero");
  double off_sum = 0.0;
  for (int i = 0; i < map.c.rows(); ++i) {
    for (int j = 0; j < map.c.cols(); ++j) {
      if (i != j) off_sum += std::abs(map.c(i, j));
    }
  }
  return off_sum / frob;
}

namespace {

std::vector<int> near_degenerate_indices(const Vector& eigenvalues, int r) {
  std::vector<int> flagged;
  const int limit = std::min<int>(r, static_cast<int>(eigenvalues.size()) - 1);
  for (int i = 0; i < limit; ++i) {
    if (eigenvalues(i + 1) - eigenvalues(i) < kSpectrumGapTol) {
      flagged.push_back(i);
    }
  }
  return flagged;
}

}  // namespace

FmapReport fmap_report(const EmbeddingBatch& snapshot_a,
                       const EmbeddingBatch& snapshot_b, int k, int r,
                       double magnitude_threshold) {
  validate_batch(snapshot_a);
  validate_batch(snapshot_b);
  if (snapshot_a.labels != snapshot_b.labels) {
    throw InvalidInput("snapshots do not describe the same ordered points");
  }

  const SpectralDecomposition dec_a =
      eigh(normalized_laplacian(build_knn_graph(snapshot_a, k)));
  const SpectralDecomposition dec_b =
      eigh(normalized_laplacian(build_knn_graph(snapshot_b, k)));

  std::vector<int> identity(snapshot_a.size());
  for (int i = 0; i < snapshot_a.size(); ++i) identity[i] = i;
  const FunctionalMap map = functional_map(dec_a, dec_b, identity, r);

  FmapReport report;
  report.c_abs = map.c.cwiseAbs();
  report.c_display = report.c_abs;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      if (report.c_display(i, j) < magnitude_threshold) {
        report.c_display(i, j) = 0.0;
      }
    }
  }
  report.od_e = off_diagonal_energy(map);
  report.degenerate_a = near_degenerate_indices(dec_a.eigenvalues, r);
  report.degenerate_b = near_degenerate_indices(dec_b.eigenvalues, r);
  return report;
}

}  // namespace casper
