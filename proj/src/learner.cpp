#include "casper/learner.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace casper {

ModelParams init_params(const MlpConfig& config, Rng& rng) {
  if (config.input_dim < 1 || config.num_classes < 1) {
    throw InvalidParameter("model dimensions must be positive");
  }
  for (int w : config.hidden) {
    if (w < 1) throw InvalidParameter("hidden widths must be positive");
  }
  ModelParams params;
  params.config = config;
  int fan_in = config.input_dim;
  for (int width : config.hidden) {
    const double a = std::sqrt(6.0 / (fan_in + width));
    Matrix w(width, fan_in);
    for (int i = 0; i < width; ++i) {
      for (int j = 0; j < fan_in; ++j) w(i, j) = rng.next_uniform(-a, a);
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(Vector::Zero(width));
    fan_in = width;
  }
  const double a = std::sqrt(6.0 / (fan_in + config.num_classes));
  params.head_weight = Matrix(config.num_classes, fan_in);
  for (int i = 0; i < config.num_classes; ++i) {
    for (int j = 0; j < fan_in; ++j) {
      params.head_weight(i, j) = rng.next_uniform(-a, a);
    }
  }
  params.head_bias = Vector::Zero(config.num_classes);
  return params;
}

ForwardTrace forward(const ModelParams& params, const Matrix& inputs) {
  if (inputs.cols() != params.config.input_dim) {
    throw InvalidInput("input width does not match the model config");
  }
  ForwardTrace trace;
  trace.inputs = inputs;
  Matrix activation = inputs;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Matrix pre = activation * params.weights[l].transpose();
    pre.rowwise() += params.biases[l].transpose();
    trace.pre_activations.push_back(pre);
    activation = pre.cwiseMax(0.0);
    trace.activations.push_back(activation);
  }
  trace.features = activation;
  trace.logits = activation * params.head_weight.transpose();
  trace.logits.rowwise() += params.head_bias.transpose();
  return trace;
}

namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (int i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

void check_labels(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows()) {
    throw InvalidInput("label count does not match logit rows");
  }
  for (int label : labels) {
    if (label < 0 || label >= logits.cols()) {
      throw InvalidInput("label out of range for the logit width");
    }
  }
}

}  // namespace

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (int i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double log_z = std::log((logits.row(i).array() - m).exp().sum()) + m;
    total += log_z - logits(i, labels[i]);
  }
  return total / logits.rows();
}

Matrix cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  Matrix grad = softmax_rows(logits);
  for (int i = 0; i < grad.rows(); ++i) grad(i, labels[i]) -= 1.0;
  return grad / logits.rows();
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  head_weight += other.head_weight;
  head_bias += other.head_bias;
  return *this;
}

ParamGrads& ParamGrads::operator*=(double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= scale;
    biases[l] *= scale;
  }
  head_weight *= scale;
  head_bias *= scale;
  return *this;
}

bool ParamGrads::all_finite() const {
  for (const Matrix& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const Vector& b : biases) {
    if (!b.allFinite()) return false;
  }
  return head_weight.allFinite() && head_bias.allFinite();
}

ParamGrads backward(const ModelParams& params, const ForwardTrace& trace,
                    const LossGrads& grads) {
  const int n = static_cast<int>(trace.inputs.rows());
  ParamGrads out;
  out.head_weight = Matrix::Zero(params.head_weight.rows(),
                                 params.head_weight.cols());
  out.head_bias = Vector::Zero(params.head_bias.size());

  Matrix d_features =
      Matrix::Zero(n, params.config.feature_dim());
  if (grads.wrt_logits.size() > 0) {
    out.head_weight = grads.wrt_logits.transpose() * trace.features;
    out.head_bias = grads.wrt_logits.colwise().sum().transpose();
    d_features = grads.wrt_logits * params.head_weight;
  }
  if (grads.wrt_features.size() > 0) {
    d_features += grads.wrt_features;  // spectral regularizer injection
  }

  out.weights.resize(params.weights.size());
  out.biases.resize(params.biases.size());
  Matrix d_act = std::move(d_features);
  for (int l = static_cast<int>(params.weights.size()) - 1; l >= 0; --l) {
    const Matrix d_pre =
        (trace.pre_activations[l].array() > 0.0).cast<double>() * d_act.array();
    const Matrix& below =
        l == 0 ? trace.inputs : trace.activations[l - 1];
    out.weights[l] = d_pre.transpose() * below;
    out.biases[l] = d_pre.colwise().sum().transpose();
    d_act = d_pre * params.weights[l];
  }
  return out;
}

void sgd_step(ModelParams& params, const ParamGrads& grads, double lr) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    params.weights[l] -= lr * grads.weights[l];
    params.biases[l] -= lr * grads.biases[l];
  }
  params.head_weight -= lr * grads.head_weight;
  params.head_bias -= lr * grads.head_bias;
}

void backward_and_step(ModelParams& params, const ForwardTrace& trace,
                       const LossGrads& grads, double lr) {
  const ParamGrads g = backward(params, trace, grads);
  if (!g.all_finite()) {
    throw TrainingDivergence("non-finite parameter gradient");
  }
  sgd_step(params, g, lr);
}

std::vector<int> knn_classify(const Matrix& support_features,
                              const std::vector<int>& support_labels,
                              const Matrix& query_features, int k) {
  const int m = static_cast<int>(support_features.rows());
  if (m < 1) throw InvalidInput("empty support set");
  if (static_cast<int>(support_labels.size()) != m) {
    throw InvalidInput("support label count mismatch");
  }
  if (k < 1 || k > m) {
    throw InvalidParameter("k must satisfy 1 <= k <= support size");
  }
  if (query_features.cols() != support_features.cols()) {
    throw InvalidInput("query dimension does not match support dimension");
  }

  std::vector<int> predictions(query_features.rows());
  std::vector<std::pair<double, int>> dist(m);
  for (int q = 0; q < query_features.rows(); ++q) {
    for (int s = 0; s < m; ++s) {
      dist[s] = {(support_features.row(s) - query_features.row(q)).norm(), s};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    std::map<int, std::pair<int, double>> votes;  // class -> (count, dist sum)
    for (int s = 0; s < k; ++s) {
      auto& [count, sum] = votes[support_labels[dist[s].second]];
      ++count;
      sum += dist[s].first;
    }
    int best_class = -1;
    int best_count = -1;
    double best_sum = 0.0;
    for (const auto& [cls, tally] : votes) {
      const auto& [count, sum] = tally;
      const bool better =
          count > best_count ||
          (count == best_count && sum < best_sum);
      // std::map iterates ascending, so equal (count, sum) keeps the
      // lower class id.
      if (better) {
        best_class = cls;
        best_count = count;
        best_sum = sum;
      }
    }
    predictions[q] = best_class;
  }
  return predictions;
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> flat(m.size());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) flat[i * m.cols() + j] = m(i, j);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != m.size()) {
    throw InvalidInput("checkpoint matrix size mismatch");
  }
  for (int i = 0; i < m.rows(); ++i) {
    for (int jj = 0; jj < m.cols(); ++jj) m(i, jj) = flat[i * m.cols() + jj];
  }
  return m;
}

}  // namespace

void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config"] = {{"input_dim", params.config.input_dim},
                 {"hidden", params.config.hidden},
                 {"num_classes", params.config.num_classes}};
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    j["layers"].push_back({{"weight", matrix_to_json(params.weights[l])},
                           {"bias", std::vector<double>(
                                        params.biases[l].data(),
                                        params.biases[l].data() +
                                            params.biases[l].size())}});
  }
  j["head"] = {{"weight", matrix_to_json(params.head_weight)},
               {"bias", std::vector<double>(
                            params.head_bias.data(),
                            params.head_bias.data() + params.head_bias.size())}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump(2) << "\n";
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw InvalidInput("unsupported checkpoint version");
  }
  ModelParams params;
  params.config.input_dim = j.at("config").at("input_dim").get<int>();
  params.config.hidden = j.at("config").at("hidden").get<std::vector<int>>();
  params.config.num_classes = j.at("config").at("num_classes").get<int>();
  if (j.contains("layers")) {
    for (const auto& layer : j.at("layers")) {
      params.weights.push_back(matrix_from_json(layer.at("weight")));
      const auto bias = layer.at("bias").get<std::vector<double>>();
      params.biases.push_back(
          Eigen::Map<const Vector>(bias.data(), bias.size()));
    }
  }
  params.head_weight = matrix_from_json(j.at("head").at("weight"));
  const auto head_bias = j.at("head").at("bias").get<std::vector<double>>();
  params.head_bias =
      Eigen::Map<const Vector>(head_bias.data(), head_bias.size());
  return params;
}

}  // namespace casper
