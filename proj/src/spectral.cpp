#include "casper/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace casper {

namespace {

void fix_signs(Matrix& vectors) {
  for (int j = 0; j < vectors.cols(); ++j) {
    int pivot = 0;
    double best = std::abs(vectors(0, j));
    for (int i = 1; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, j));
      if (mag > best) {
        best = mag;
        pivot = i;
      }
    }
    if (vectors(pivot, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

}  // namespace

SpectralDecomposition eigh(const Matrix& symmetric) {
  if (symmetric.rows() != symmetric.cols() || symmetric.rows() < 1) {
    throw InvalidInput("eigh requires a non-empty square matrix");
  }
  const double scale = std::max(1.0, symmetric.cwiseAbs().maxCoeff());
  if ((symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * scale) {
    throw InvalidInput("eigh requires a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed to converge");
  }
  SpectralDecomposition dec{solver.eigenvalues(), solver.eigenvectors()};
  fix_signs(dec.eigenvectors);
  return dec;
}

SpectralDecomposition eigh(const Laplacian& laplacian) {
  return eigh(laplacian.matrix);
}

double casper_loss(const Vector& ascending_eigenvalues, int g) {
  const int n = static_cast<int>(ascending_eigenvalues.size());
  if (g < 1 || g + 1 > n) {
    throw InvalidParameter("casper_loss requires 1 <= g and g + 1 <= n");
  }
  return -ascending_eigenvalues(g) + ascending_eigenvalues.head(g).sum();
}

void CasperConfig::validate() const {
  if (rho < 0.0) throw InvalidParameter("rho must be >= 0");
  if (p < 2) throw InvalidParameter("p must be >= 2");
  if (t < 2) throw InvalidParameter("t must be >= 2");
  if (mc_samples < 1) throw InvalidParameter("mc_samples must be >= 1");
  if (k < 1) throw InvalidParameter("k must be >= 1");
  if (static_cast<long long>(p) * t < k + 1) {
    throw InvalidParameter("sub-graph size p*t must be at least k + 1");
  }
}

namespace {

Matrix adjacency_on_edges(const Matrix& cosines, int n,
                          const std::vector<std::pair<int, int>>& edges) {
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [i, j] : edges) {
    const double w = std::min(1.0, std::max(kWeightFloor, cosines(i, j)));
    a(i, j) = w;
    a(j, i) = w;
  }
  return a;
}

double eigengap_from_adjacency(const Matrix& adjacency, int g) {
  const int n = static_cast<int>(adjacency.rows());
  const Vector degrees = adjacency.rowwise().sum();
  Vector inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    inv_sqrt(i) = degrees(i) > 0.0 ? 1.0 / std::sqrt(degrees(i)) : 0.0;
  }
  Matrix l = Matrix::Identity(n, n) -
             inv_sqrt.asDiagonal() * adjacency * inv_sqrt.asDiagonal();
  l = ((l + l.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(l);
  return casper_loss(solver.eigenvalues(), g);
}

}  // namespace

double eigengap_loss_frozen(const Matrix& features,
                            const std::vector<std::pair<int, int>>& edges,
                            int g) {
  const int n = static_cast<int>(features.rows());
  const Matrix cos = cosine_matrix(features);
  return eigengap_from_adjacency(adjacency_on_edges(cos, n, edges), g);
}

EigengapResult casper_loss_and_grad(const Matrix& features,
                                    const std::vector<int>& labels, int k,
                                    int g) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  if (g + 1 > n) {
    throw InvalidParameter("g + 1 must not exceed the node count");
  }

  const LatentGraph graph = build_knn_graph(EmbeddingBatch{features, labels}, k);
  const Laplacian lap = normalized_laplacian(graph);
  const SpectralDecomposition dec = eigh(lap.matrix);

  EigengapResult result;
  result.loss = casper_loss(dec.eigenvalues, g);
  result.degenerate =
      (dec.eigenvalues(g) - dec.eigenvalues(g - 1) < kDegeneracyTol) ||
      (g + 1 < n && dec.eigenvalues(g + 1) - dec.eigenvalues(g) < kDegeneracyTol);

  // dloss/dL = sum_{j<=g} u_j u_j^T - u_{g+1} u_{g+1}^T  (first-order
  // perturbation of simple eigenvalues; spectral projector form, so shared
  // eigenspaces inside 1..g are handled exactly).
  const Matrix u_low = dec.eigenvectors.leftCols(g);
  const Vector u_gap = dec.eigenvectors.col(g);
  const Matrix grad_l =
      u_low * u_low.transpose() - u_gap * u_gap.transpose();

  // Chain through L = I - D^{-1/2} A D^{-1/2} with D = diag(A 1):
  //   dloss/dA_pq = H_pq d_p^{-1/2} d_q^{-1/2} + t_p + t_q,
  //   t_i = -1/(2 d_i) * sum_j H_ij N_ij,   H = -dloss/dL.
  const Matrix h = -grad_l;
  const Matrix n_mat = Matrix::Identity(n, n) - lap.matrix;
  const Vector& degrees = lap.degrees;
  Vector inv_sqrt(n), t_coef(n);
  for (int i = 0; i < n; ++i) {
    inv_sqrt(i) = degrees(i) > 0.0 ? 1.0 / std::sqrt(degrees(i)) : 0.0;
    t_coef(i) = degrees(i) > 0.0
                    ? -0.5 / degrees(i) * h.row(i).dot(n_mat.row(i))
                    : 0.0;
  }

  // Chain through the cosine weights on the selected edges. The weight is
  // the cosine clamped to [kWeightFloor, 1]; outside the open interval the
  // derivative is zero.
  const Matrix cos = cosine_matrix(features);
  Vector true_norms(n), norms(n);
  for (int i = 0; i < n; ++i) {
    true_norms(i) = features.row(i).norm();
    norms(i) = std::max(true_norms(i), kNormFloor);
  }

  Matrix grad = Matrix::Zero(n, d);
  for (const auto& [i, j] : edge_list(graph)) {
    if (!(cos(i, j) > kWeightFloor && cos(i, j) < 1.0)) continue;
    const double m_ij = h(i, j) * inv_sqrt(i) * inv_sqrt(j) + t_coef(i) + t_coef(j);
    const double g_cos = 2.0 * m_ij;  // A_ij and A_ji share the weight
    const double denom = norms(i) * norms(j);
    Eigen::RowVectorXd gi = features.row(j) / denom;
    Eigen::RowVectorXd gj = features.row(i) / denom;
    if (true_norms(i) > kNormFloor) {
      gi -= cos(i, j) / (norms(i) * norms(i)) * features.row(i);
    }
    if (true_norms(j) > kNormFloor) {
      gj -= cos(i, j) / (norms(j) * norms(j)) * features.row(j);
    }
    grad.row(i) += g_cos * gi;
    grad.row(j) += g_cos * gj;
  }
  result.feature_grad = std::move(grad);
  return result;
}

BatchEigengapResult casper_batch_loss(
    const std::map<int, std::vector<Eigen::RowVectorXd>>& features_by_class,
    const CasperConfig& cfg, Rng& rng) {
  cfg.validate();

  // Eligibility is settled before any random draw so an error here leaves
  // the generator untouched.
  std::vector<int> eligible;
  for (const auto& [cls, rows] : features_by_class) {
    if (static_cast<int>(rows.size()) >= cfg.t) eligible.push_back(cls);
  }
  if (static_cast<int>(eligible.size()) < cfg.p) {
    throw InsufficientClasses("need at least p classes with t exemplars");
  }

  const int nodes = cfg.p * cfg.t;
  const int dim = static_cast<int>(features_by_class.begin()->second[0].size());
  const double weight = 1.0 / cfg.mc_samples;

  BatchEigengapResult out;
  for (int s = 0; s < cfg.mc_samples; ++s) {
    const auto class_picks =
        rng.sample_without_replacement(eligible.size(), cfg.p);

    Matrix features(nodes, dim);
    std::vector<int> labels(nodes);
    std::vector<ExemplarKey> keys(nodes);
    int row = 0;
    for (const std::size_t cpick : class_picks) {
      const int cls = eligible[cpick];
      const auto& pool = features_by_class.at(cls);
      const auto idx = rng.sample_without_replacement(pool.size(), cfg.t);
      for (const std::size_t e : idx) {
        features.row(row) = pool[e];
        labels[row] = cls;
        keys[row] = {cls, static_cast<int>(e)};
        ++row;
      }
    }

    // Gap enforced at p: the sub-graph spans exactly p classes.
    const EigengapResult sub =
        casper_loss_and_grad(features, labels, cfg.k, cfg.p);
    out.loss += weight * sub.loss;
    out.any_degenerate = out.any_degenerate || sub.degenerate;
    for (int r = 0; r < nodes; ++r) {
      auto [it, inserted] = out.exemplar_grads.try_emplace(
          keys[r], weight * sub.feature_grad.row(r));
      if (!inserted) it->second += weight * sub.feature_grad.row(r);
    }
  }
  return out;
}

}  // namespace casper
