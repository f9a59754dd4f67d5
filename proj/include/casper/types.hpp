#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace casper {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when a data argument violates its contract (shape, finiteness,
// label range, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a tuning parameter is out of its admissible range (k >= n,
// g + 1 > n, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown by the batched spectral loss when fewer than p classes hold at
// least t exemplars.
class InsufficientClasses : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when training produces non-finite losses or gradients.
class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration / manifest problems (bad TOML, unknown override keys, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A batch of latent feature vectors with integer class labels. Rows of
/// `features` pair with entries of `labels`.
struct EmbeddingBatch {
  Matrix features;          // n x d
  std::vector<int> labels;  // size n

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

/// Checks the EmbeddingBatch invariants: n >= 1, d >= 1, finite rows,
/// non-negative labels matching the row count.
void validate_batch(const EmbeddingBatch& batch);

}  // namespace casper
