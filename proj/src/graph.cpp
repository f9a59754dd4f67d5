#include "casper/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace casper {

void validate_batch(const EmbeddingBatch& batch) {
  if (batch.features.rows() < 1 || batch.features.cols() < 1) {
    throw InvalidInput("embedding batch must be at least 1x1");
  }
  if (!batch.features.allFinite()) {
    throw InvalidInput("embedding batch contains non-finite features");
  }
  if (static_cast<int>(batch.labels.size()) != batch.size()) {
    throw InvalidInput("label count does not match feature row count");
  }
  for (int label : batch.labels) {
    if (label < 0) throw InvalidInput("labels must be non-negative");
  }
}

void validate_graph(const LatentGraph& g) {
  const Matrix& a = g.adjacency;
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw InvalidInput("adjacency must be square and non-empty");
  }
  if (static_cast<int>(g.labels.size()) != g.size()) {
    throw InvalidInput("graph label count does not match node count");
  }
  for (int i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0.0) throw InvalidInput("adjacency has a self-loop");
    for (int j = 0; j < a.cols(); ++j) {
      if (a(i, j) != a(j, i)) throw InvalidInput("adjacency is not symmetric");
      if (!(a(i, j) >= 0.0 && a(i, j) <= 1.0)) {
        throw InvalidInput("adjacency weight outside [0, 1]");
      }
    }
  }
}

Matrix cosine_matrix(const Matrix& features) {
  const int n = static_cast<int>(features.rows());
  Vector norms(n);
  for (int i = 0; i < n; ++i) {
    norms(i) = std::max(features.row(i).norm(), kNormFloor);
  }
  Matrix cos = features * features.transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cos(i, j) /= norms(i) * norms(j);
    }
  }
  return cos;
}

LatentGraph build_knn_graph(const EmbeddingBatch& batch, int k) {
  validate_batch(batch);
  const int n = batch.size();
  if (k < 1 || k >= n) {
    throw InvalidParameter("k must satisfy 1 <= k < n");
  }

  const Matrix cos = cosine_matrix(batch.features);

  Matrix adjacency = Matrix::Zero(n, n);
  std::vector<int> order(n - 1);
  for (int i = 0; i < n; ++i) {
    int pos = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i) order[pos++] = j;
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                        if (cos(i, a) != cos(i, b)) return cos(i, a) > cos(i, b);
                        return a < b;
                      });
    for (int s = 0; s < k; ++s) {
      const int j = order[s];
      // The cosine can exceed 1 by rounding for near-parallel rows.
      const double w = std::min(1.0, std::max(kWeightFloor, cos(i, j)));
      adjacency(i, j) = std::max(adjacency(i, j), w);
      adjacency(j, i) = adjacency(i, j);
    }
  }
  return LatentGraph{std::move(adjacency), batch.labels};
}

Laplacian normalized_laplacian(const LatentGraph& g) {
  validate_graph(g);
  const int n = g.size();
  const Vector degrees = g.adjacency.rowwise().sum();
  Vector inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    inv_sqrt(i) = degrees(i) > 0.0 ? 1.0 / std::sqrt(degrees(i)) : 0.0;
  }
  Matrix l = Matrix::Identity(n, n) -
             inv_sqrt.asDiagonal() * g.adjacency * inv_sqrt.asDiagonal();
  l = ((l + l.transpose()) / 2.0).eval();
  return Laplacian{std::move(l), degrees};
}

namespace {

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

int connected_components(const LatentGraph& g, double threshold) {
  validate_graph(g);
  if (threshold < 0.0) throw InvalidParameter("threshold must be >= 0");
  const int n = g.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (g.adjacency(i, j) > threshold) {
        const int ri = find_root(parent, i);
        const int rj = find_root(parent, j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (find_root(parent, i) == i) ++count;
  }
  return count;
}

std::vector<std::pair<int, int>> edge_list(const LatentGraph& g) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = i + 1; j < g.size(); ++j) {
      if (g.adjacency(i, j) > 0.0) edges.emplace_back(i, j);
    }
  }
  return edges;
}

}  // namespace casper
