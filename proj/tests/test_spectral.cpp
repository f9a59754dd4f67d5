#include "casper/spectral.hpp"

#include "casper/gradcheck.hpp"
#include "casper/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <set>

using namespace casper;

namespace {

Matrix random_symmetric(Rng& rng, int n, double lo, double hi) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = rng.next_uniform(lo, hi);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

// g tight clusters of near-duplicate vectors around orthogonal directions;
// cross-class cosines are ~0 so the k-NN graph never links clusters.
Matrix clustered_features(Rng& rng, int clusters, int per_cluster, int d,
                          double jitter) {
  Matrix f(clusters * per_cluster, d);
  for (int c = 0; c < clusters; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      for (int j = 0; j < d; ++j) {
        f(c * per_cluster + i, j) = jitter * rng.next_gaussian();
      }
      f(c * per_cluster + i, c) += 10.0;
    }
  }
  return f;
}

std::vector<int> cluster_labels(int clusters, int per_cluster) {
  std::vector<int> labels(clusters * per_cluster);
  for (int c = 0; c < clusters; ++c) {
    for (int i = 0; i < per_cluster; ++i) labels[c * per_cluster + i] = c;
  }
  return labels;
}

}  // namespace

TEST_CASE("eigh on the 2x2 path Laplacian with the sign convention") {
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  const SpectralDecomposition dec = eigh(l);
  CHECK(dec.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(dec.eigenvalues(1) == doctest::Approx(2.0).epsilon(1e-14));
  const double s = 1.0 / std::sqrt(2.0);
  // both entries tie in magnitude; the convention makes entry 0 positive
  CHECK(dec.eigenvectors(0, 0) == doctest::Approx(s));
  CHECK(dec.eigenvectors(1, 0) == doctest::Approx(s));
  CHECK(dec.eigenvectors(0, 1) == doctest::Approx(s));
  CHECK(dec.eigenvectors(1, 1) == doctest::Approx(-s));
}

TEST_CASE("eigh of the identity") {
  const SpectralDecomposition dec = eigh(Matrix(Matrix::Identity(3, 3)));
  for (int i = 0; i < 3; ++i) CHECK(dec.eigenvalues(i) == doctest::Approx(1.0));
}

TEST_CASE("eigh rejects non-symmetric input") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  CHECK_THROWS_AS(eigh(m), InvalidInput);
}

TEST_CASE("eigh round-trip, orthonormality, residual") {
  Rng rng(51);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_index(63));
    const Matrix l = random_symmetric(rng, n, -2.0, 2.0);
    const SpectralDecomposition dec = eigh(l);
    const Matrix& u = dec.eigenvectors;
    CHECK((u.transpose() * u - Matrix::Identity(n, n)).norm() <= 1e-8);
    const Matrix rebuilt = u * dec.eigenvalues.asDiagonal() * u.transpose();
    CHECK((rebuilt - l).norm() <= 1e-6);
    for (int j = 0; j < n; ++j) {
      CHECK((l * u.col(j) - dec.eigenvalues(j) * u.col(j)).norm() <= 1e-6);
    }
    for (int j = 1; j < n; ++j) {
      CHECK(dec.eigenvalues(j) >= dec.eigenvalues(j - 1));
    }
  }
}

TEST_CASE("eigh is bit-reproducible") {
  Rng rng(4);
  const Matrix l = random_symmetric(rng, 12, -1.0, 1.0);
  const SpectralDecomposition a = eigh(l);
  const SpectralDecomposition b = eigh(l);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.eigenvectors == b.eigenvectors);
}

TEST_CASE("casper_loss arithmetic") {
  Vector ev(4);
  ev << 0.0, 0.0, 0.8, 1.2;
  CHECK(casper_loss(ev, 2) == doctest::Approx(-0.8));

  ev << 0.0, 0.1, 0.2, 1.9;
  CHECK(casper_loss(ev, 3) == doctest::Approx(-1.6));

  // complete K4 spectrum from the eigensolver
  Matrix a = Matrix::Ones(4, 4) - Matrix::Identity(4, 4);
  const SpectralDecomposition dec =
      eigh(normalized_laplacian({a, {0, 0, 1, 1}}));
  CHECK(dec.eigenvalues(1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(casper_loss(dec.eigenvalues, 2) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(casper_loss(ev, 4), InvalidParameter);
  CHECK_THROWS_AS(casper_loss(ev, 0), InvalidParameter);
}

TEST_CASE("casper_loss stays within the spectrum bound") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_index(14));
    Vector ev(n);
    for (int i = 0; i < n; ++i) ev(i) = rng.next_uniform(0.0, 2.0);
    std::sort(ev.data(), ev.data() + n);
    const int g = 1 + static_cast<int>(rng.next_index(n - 1));
    const double loss = casper_loss(ev, g);
    CHECK(loss >= -2.0);
    CHECK(loss <= 2.0 * g);
  }
}

TEST_CASE("loss is invariant to node relabeling") {
  Rng rng(9);
  Matrix f(12, 5);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 5; ++j) f(i, j) = rng.next_gaussian();
  }
  const std::vector<int> labels(12, 0);
  const EigengapResult base = casper_loss_and_grad(f, labels, 3, 2);

  std::vector<int> perm(12);
  for (int i = 0; i < 12; ++i) perm[i] = i;
  Rng shuffle_rng(2);
  shuffle_rng.shuffle(perm);
  Matrix permuted(12, 5);
  for (int i = 0; i < 12; ++i) permuted.row(i) = f.row(perm[i]);
  const EigengapResult relabeled = casper_loss_and_grad(permuted, labels, 3, 2);
  CHECK(relabeled.loss == doctest::Approx(base.loss).epsilon(1e-9));
}

TEST_CASE("well-separated clusters drive the loss to -lambda_{g+1}") {
  Rng rng(13);
  const int g = 3, per = 6, d = 8;
  const Matrix f = clustered_features(rng, g, per, d, 1e-4);
  const auto labels = cluster_labels(g, per);
  const LatentGraph graph = build_knn_graph({f, labels}, 2);
  const SpectralDecomposition dec = eigh(normalized_laplacian(graph));
  for (int j = 0; j < g; ++j) CHECK(dec.eigenvalues(j) <= 1e-6);
  const EigengapResult res = casper_loss_and_grad(f, labels, 2, g);
  CHECK(res.loss < 0.0);
  CHECK(res.loss ==
        doctest::Approx(-dec.eigenvalues(g)).epsilon(1e-6));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(101);
  int checked = 0;
  while (checked < 8) {
    const int n = 8 + static_cast<int>(rng.next_index(17));
    const int d = 4 + static_cast<int>(rng.next_index(13));
    const int k = 2 + static_cast<int>(rng.next_index(4));
    const int g = 2 + static_cast<int>(rng.next_index(3));
    Matrix f(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) f(i, j) = rng.next_gaussian();
    }
    const GradCheckCase result = check_casper_feature_grad(f, k, g);
    if (result.degenerate) continue;
    CHECK(result.rel_error <= kGradCheckTol);
    ++checked;
  }
}

TEST_CASE("frozen-topology loss equals the composed loss at the base point") {
  Rng rng(19);
  Matrix f(10, 6);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 6; ++j) f(i, j) = rng.next_gaussian();
  }
  const std::vector<int> labels(10, 0);
  const EigengapResult res = casper_loss_and_grad(f, labels, 3, 2);
  const auto edges = edge_list(build_knn_graph({f, labels}, 3));
  CHECK(eigengap_loss_frozen(f, edges, 2) == doctest::Approx(res.loss).epsilon(1e-14));
}

TEST_CASE("positive scaling keeps the loss, divides the gradient") {
  Rng rng(29);
  Matrix f(9, 4);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 4; ++j) f(i, j) = rng.next_gaussian();
  }
  const std::vector<int> labels(9, 0);
  const EigengapResult base = casper_loss_and_grad(f, labels, 2, 2);
  const double c = 3.7;
  const EigengapResult scaled = casper_loss_and_grad(c * f, labels, 2, 2);
  CHECK(scaled.loss == doctest::Approx(base.loss).epsilon(1e-12));
  CHECK((scaled.feature_grad - base.feature_grad / c).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("rotating all features leaves the loss unchanged") {
  Rng rng(37);
  Matrix f(11, 6);
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 6; ++j) f(i, j) = rng.next_gaussian();
  }
  Matrix gaussian(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) gaussian(i, j) = rng.next_gaussian();
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian).householderQ();
  const std::vector<int> labels(11, 0);
  const EigengapResult base = casper_loss_and_grad(f, labels, 3, 2);
  const EigengapResult rotated =
      casper_loss_and_grad(f * q.transpose(), labels, 3, 2);
  CHECK(std::abs(rotated.loss - base.loss) <= 1e-8);
}

TEST_CASE("degenerate spectra are flagged, not fatal") {
  // four identical vectors with k=3 form K4: lambda_2 = lambda_3 exactly
  Matrix f(4, 3);
  for (int i = 0; i < 4; ++i) f.row(i) << 1.0, 2.0, 3.0;
  const EigengapResult res = casper_loss_and_grad(f, {0, 0, 1, 1}, 3, 2);
  CHECK(res.degenerate);
  CHECK(std::isfinite(res.loss));
  CHECK(res.feature_grad.allFinite());
}

TEST_CASE("casper config invariants") {
  CasperConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.p = 4;
  cfg.t = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.t = 8;
  cfg.rho = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.rho = 0.0;
  cfg.p = 2;
  cfg.t = 2;
  cfg.k = 5;  // p*t = 4 < k+1
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

namespace {

std::map<int, std::vector<Eigen::RowVectorXd>> by_class_map(
    const Matrix& features, const std::vector<int>& labels) {
  std::map<int, std::vector<Eigen::RowVectorXd>> map;
  for (int i = 0; i < features.rows(); ++i) {
    map[labels[i]].push_back(features.row(i));
  }
  return map;
}

}  // namespace

TEST_CASE("degenerate sampling reproduces the full-buffer loss") {
  Rng rng(41);
  const int classes = 3, per = 4, d = 6;
  const Matrix f = clustered_features(rng, classes, per, d, 0.3);
  const auto labels = cluster_labels(classes, per);

  CasperConfig cfg;
  cfg.p = classes;
  cfg.t = per;
  cfg.mc_samples = 1;
  cfg.k = 3;

  Rng sample_rng(8);
  const BatchEigengapResult batch =
      casper_batch_loss(by_class_map(f, labels), cfg, sample_rng);
  const EigengapResult full = casper_loss_and_grad(f, labels, cfg.k, classes);
  CHECK(batch.loss == doctest::Approx(full.loss).epsilon(1e-9));

  // per-exemplar gradients must match the full-run rows (keys map back to
  // class-local positions, which here follow row order)
  for (int i = 0; i < f.rows(); ++i) {
    const ExemplarKey key{labels[i], i % per};
    REQUIRE(batch.exemplar_grads.count(key) == 1);
    CHECK((batch.exemplar_grads.at(key) - full.feature_grad.row(i))
              .cwiseAbs()
              .maxCoeff() <= 1e-9);
  }
}

TEST_CASE("clustered buffers give negative mean loss across seeds") {
  Rng rng(43);
  const int classes = 5, per = 10, d = 8;
  const Matrix f = clustered_features(rng, classes, per, d, 1e-3);
  const auto labels = cluster_labels(classes, per);
  CasperConfig cfg;
  cfg.p = 3;
  cfg.t = 4;
  cfg.mc_samples = 2;
  cfg.k = 2;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    Rng sample_rng(seed);
    const BatchEigengapResult res =
        casper_batch_loss(by_class_map(f, labels), cfg, sample_rng);
    CHECK(res.loss < 0.0);
  }
}

TEST_CASE("batch loss is seeded and bounded") {
  Rng rng(47);
  const int classes = 4, per = 8, d = 5;
  Matrix f(classes * per, d);
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < d; ++j) f(i, j) = rng.next_gaussian();
  }
  const auto labels = cluster_labels(classes, per);
  CasperConfig cfg;
  cfg.p = 2;
  cfg.t = 4;
  cfg.mc_samples = 3;
  cfg.k = 2;
  const auto map = by_class_map(f, labels);

  Rng r1(100), r1b(100), r2(200);
  const BatchEigengapResult a = casper_batch_loss(map, cfg, r1);
  const BatchEigengapResult a_again = casper_batch_loss(map, cfg, r1b);
  const BatchEigengapResult b = casper_batch_loss(map, cfg, r2);
  CHECK(a.loss == a_again.loss);
  CHECK(a.exemplar_grads.size() == a_again.exemplar_grads.size());
  CHECK(a.loss != b.loss);
  for (const BatchEigengapResult* res : {&a, &b}) {
    CHECK(std::isfinite(res->loss));
    CHECK(res->loss >= -2.0);
    CHECK(res->loss <= 2.0 * cfg.p);
  }
}

TEST_CASE("ineligible classes are excluded; too few classes throw") {
  Rng rng(53);
  Matrix f(9, 4);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 4; ++j) f(i, j) = rng.next_gaussian();
  }
  // classes: 0 with 4, 1 with 4, 2 with only 1 exemplar
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2};
  CasperConfig cfg;
  cfg.p = 2;
  cfg.t = 3;
  cfg.mc_samples = 4;
  cfg.k = 2;
  Rng sample_rng(3);
  const BatchEigengapResult res =
      casper_batch_loss(by_class_map(f, labels), cfg, sample_rng);
  for (const auto& [key, grad] : res.exemplar_grads) {
    CHECK(key.first != 2);  // the one-exemplar class is never sampled
  }

  cfg.p = 3;  // now class 2 is needed but ineligible
  Rng other_rng(3);
  CHECK_THROWS_AS(casper_batch_loss(by_class_map(f, labels), cfg, other_rng),
                  InsufficientClasses);
}
