#include "casper/gradcheck.hpp"

#include "casper/graph.hpp"
#include "casper/spectral.hpp"

#include <cmath>
#include <functional>

namespace casper {

namespace {

double relative_error(const Matrix& analytic, const Matrix& fd) {
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

std::vector<int> zero_labels(int n) { return std::vector<int>(n, 0); }

}  // namespace

GradCheckCase check_casper_feature_grad(const Matrix& features, int k, int g) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());

  const EigengapResult analytic =
      casper_loss_and_grad(features, zero_labels(n), k, g);
  GradCheckCase result;
  result.degenerate = analytic.degenerate;

  const auto edges =
      edge_list(build_knn_graph(EmbeddingBatch{features, zero_labels(n)}, k));
  Matrix fd(n, d);
  Matrix probe = features;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + kFdStep;
      const double up = eigengap_loss_frozen(probe, edges, g);
      probe(i, j) = saved - kFdStep;
      const double down = eigengap_loss_frozen(probe, edges, g);
      probe(i, j) = saved;
      fd(i, j) = (up - down) / (2.0 * kFdStep);
    }
  }
  result.rel_error = relative_error(analytic.feature_grad, fd);
  return result;
}

namespace {

// Flattened view over every parameter of the model, for generic FD loops.
std::vector<double*> parameter_slots(ModelParams& params) {
  std::vector<double*> slots;
  for (Matrix& w : params.weights) {
    for (int i = 0; i < w.size(); ++i) slots.push_back(w.data() + i);
  }
  for (Vector& b : params.biases) {
    for (int i = 0; i < b.size(); ++i) slots.push_back(b.data() + i);
  }
  for (int i = 0; i < params.head_weight.size(); ++i) {
    slots.push_back(params.head_weight.data() + i);
  }
  for (int i = 0; i < params.head_bias.size(); ++i) {
    slots.push_back(params.head_bias.data() + i);
  }
  return slots;
}

std::vector<double> flatten(const ParamGrads& grads) {
  std::vector<double> flat;
  for (const Matrix& w : grads.weights) {
    flat.insert(flat.end(), w.data(), w.data() + w.size());
  }
  for (const Vector& b : grads.biases) {
    flat.insert(flat.end(), b.data(), b.data() + b.size());
  }
  flat.insert(flat.end(), grads.head_weight.data(),
              grads.head_weight.data() + grads.head_weight.size());
  flat.insert(flat.end(), grads.head_bias.data(),
              grads.head_bias.data() + grads.head_bias.size());
  return flat;
}

}  // namespace

GradCheckCase check_full_model_grad(const MlpConfig& config,
                                    const Matrix& inputs,
                                    const std::vector<int>& labels, int k,
                                    int g, double rho, std::uint64_t seed) {
  Rng init_rng(seed);
  ModelParams params = init_params(config, init_rng);

  // Analytic path: CE gradient through the head plus the regularizer's
  // feature gradient injected before the extractor.
  const ForwardTrace trace = forward(params, inputs);
  const EigengapResult casper =
      casper_loss_and_grad(trace.features, labels, k, g);
  GradCheckCase result;
  result.degenerate = casper.degenerate;
  const ParamGrads analytic =
      backward(params, trace,
               {cross_entropy_grad(trace.logits, labels),
                Matrix(rho * casper.feature_grad)});
  const std::vector<double> analytic_flat = flatten(analytic);

  // FD of the same composed objective with the edge selection pinned.
  const auto edges = edge_list(
      build_knn_graph(EmbeddingBatch{trace.features, labels}, k));
  const auto loss_at = [&]() {
    const ForwardTrace t = forward(params, inputs);
    return cross_entropy(t.logits, labels) +
           rho * eigengap_loss_frozen(t.features, edges, g);
  };

  std::vector<double*> slots = parameter_slots(params);
  double max_abs = 1e-12;
  double max_diff = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double saved = *slots[s];
    *slots[s] = saved + kFdStep;
    const double up = loss_at();
    *slots[s] = saved - kFdStep;
    const double down = loss_at();
    *slots[s] = saved;
    const double fd = (up - down) / (2.0 * kFdStep);
    max_abs = std::max(max_abs, std::abs(fd));
    max_diff = std::max(max_diff, std::abs(fd - analytic_flat[s]));
  }
  result.rel_error = max_diff / max_abs;
  return result;
}

GradCheckReport run_gradcheck_suite(int instances, std::uint64_t seed) {
  if (instances < 1) throw InvalidParameter("instances must be positive");
  GradCheckReport report;
  Rng rng(mix64(seed));

  while (report.instances < instances) {
    const int n = 8 + static_cast<int>(rng.next_index(17));   // [8, 24]
    const int d = 4 + static_cast<int>(rng.next_index(13));   // [4, 16]
    const int k = 2 + static_cast<int>(rng.next_index(4));    // [2, 5]
    const int g = 2 + static_cast<int>(rng.next_index(3));    // [2, 4]
    Matrix features(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) features(i, j) = rng.next_gaussian();
    }
    const GradCheckCase feature_case = check_casper_feature_grad(features, k, g);
    if (feature_case.degenerate) {
      ++report.degenerate_skipped;
      continue;
    }

    MlpConfig config;
    config.input_dim = d;
    config.hidden = {10, 8};
    config.num_classes = 4;
    Matrix inputs(n, d);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) inputs(i, j) = rng.next_gaussian();
      labels[i] = static_cast<int>(rng.next_index(config.num_classes));
    }
    const GradCheckCase model_case = check_full_model_grad(
        config, inputs, labels, k, g, 0.5, rng.next_u64());
    if (model_case.degenerate) {
      ++report.degenerate_skipped;
      continue;
    }

    ++report.instances;
    report.max_feature_rel_error =
        std::max(report.max_feature_rel_error, feature_case.rel_error);
    report.max_model_rel_error =
        std::max(report.max_model_rel_error, model_case.rel_error);
  }
  return report;
}

}  // namespace casper
