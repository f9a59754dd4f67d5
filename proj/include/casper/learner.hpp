#pragma once

#include "casper/rng.hpp"
#include "casper/types.hpp"

#include <filesystem>
#include <vector>

namespace casper {

/// Layer widths of the feature extractor. `hidden` may be empty, in which
/// case the extractor is the identity and features equal the raw inputs.
/// The last hidden width is the latent dimension the graph machinery sees.
struct MlpConfig {
  int input_dim = 16;
  std::vector<int> hidden = {64, 32};
  int num_classes = 10;

  int feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
};

/// ReLU MLP feature extractor plus a linear classification head. Extractor
/// layers apply ReLU after every affine map, so features are non-negative,
/// which suits cosine edge weights.
struct ModelParams {
  MlpConfig config;
  std::vector<Matrix> weights;  // layer l: hidden[l] x fan_in
  std::vector<Vector> biases;
  Matrix head_weight;  // num_classes x feature_dim
  Vector head_bias;
};

/// Glorot-uniform initialization, deterministic under the given generator.
ModelParams init_params(const MlpConfig& config, Rng& rng);

/// Activations retained for the backward pass.
struct ForwardTrace {
  Matrix inputs;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  Matrix features;  // n x feature_dim
  Matrix logits;    // n x num_classes
};

ForwardTrace forward(const ModelParams& params, const Matrix& inputs);

/// Mean over rows of -log softmax(logits)[label], stabilized by
/// max-subtraction.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// d(mean cross-entropy)/d(logits) = (softmax - onehot) / n.
Matrix cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels);

/// Upstream gradients entering the backward pass. `wrt_features` is the
/// injection point for the spectral regularizer's feature gradient; it is
/// added to the classification path's feature gradient before the extractor
/// layers. Either matrix may be empty (treated as zero).
struct LossGrads {
  Matrix wrt_logits;
  Matrix wrt_features;
};

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix head_weight;
  Vector head_bias;

  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double scale);
  bool all_finite() const;
};

/// Reverse-mode gradients of the traced forward pass.
ParamGrads backward(const ModelParams& params, const ForwardTrace& trace,
                    const LossGrads& grads);

void sgd_step(ModelParams& params, const ParamGrads& grads, double lr);

/// backward + SGD update. Throws TrainingDivergence on non-finite gradients.
void backward_and_step(ModelParams& params, const ForwardTrace& trace,
                       const LossGrads& grads, double lr);

/// Majority vote over the k nearest supports in Euclidean distance. Vote
/// ties break toward the class with the smallest summed distance among the
/// k neighbours, then toward the lower class id.
std::vector<int> knn_classify(const Matrix& support_features,
                              const std::vector<int>& support_labels,
                              const Matrix& query_features, int k);

/// Versioned JSON checkpoint (config + flat parameter arrays); values
/// round-trip bit-exactly.
void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace casper
