#include "casper/metrics.hpp"

#include "casper/learner.hpp"

#include <algorithm>
#include <map>

namespace casper {

AccuracyMatrix::AccuracyMatrix(int tasks) : tasks_(tasks) {
  if (tasks < 1) throw InvalidParameter("accuracy matrix needs >= 1 task");
  values_ = Matrix::Zero(tasks, tasks);
  filled_.setConstant(tasks, tasks, false);
}

void AccuracyMatrix::set(int task, int checkpoint, double percent) {
  if (task < 0 || checkpoint < 0 || task >= tasks_ || checkpoint >= tasks_ ||
      task > checkpoint) {
    throw InvalidParameter("accuracy entries are defined for task <= checkpoint");
  }
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw InvalidInput("accuracy must lie in [0, 100]");
  }
  values_(task, checkpoint) = percent;
  filled_(task, checkpoint) = true;
}

double AccuracyMatrix::at(int task, int checkpoint) const {
  if (task < 0 || checkpoint < 0 || task >= tasks_ || checkpoint >= tasks_ ||
      task > checkpoint || !filled_(task, checkpoint)) {
    throw InvalidInput("accuracy entry not available");
  }
  return values_(task, checkpoint);
}

bool AccuracyMatrix::complete_column(int checkpoint) const {
  for (int i = 0; i <= checkpoint; ++i) {
    if (!filled_(i, checkpoint)) return false;
  }
  return true;
}

double final_average_accuracy(const AccuracyMatrix& m) {
  const int last = m.tasks() - 1;
  if (!m.complete_column(last)) {
    throw InvalidInput("final accuracy column is incomplete");
  }
  double sum = 0.0;
  for (int i = 0; i < m.tasks(); ++i) sum += m.at(i, last);
  return sum / m.tasks();
}

std::optional<double> adjusted_forgetting(const AccuracyMatrix& m) {
  const int t = m.tasks();
  if (t < 2) return std::nullopt;
  if (!m.complete_column(t - 1)) {
    throw InvalidInput("final accuracy column is incomplete");
  }
  constexpr double kPeakFloor = 1e-9;
  double sum = 0.0;
  for (int i = 0; i < t - 1; ++i) {
    double peak = 0.0;
    for (int j = i; j < t - 1; ++j) peak = std::max(peak, m.at(i, j));
    const double drop = (peak - m.at(i, t - 1)) / std::max(peak, kPeakFloor);
    // A final accuracy above the peak is no forgetting, not negative
    // forgetting; clamping per task keeps the zero value meaningful.
    sum += std::clamp(drop, 0.0, 1.0);
  }
  return std::clamp(100.0 / (t - 1) * sum, 0.0, 100.0);
}

double label_signal_variation(const LatentGraph& g) {
  validate_graph(g);
  double sigma = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      if (g.labels[i] != g.labels[j]) sigma += g.adjacency(i, j);
    }
  }
  return sigma;
}

IntraClassVariance intra_class_variance(const EmbeddingBatch& batch) {
  validate_batch(batch);
  std::map<int, std::vector<int>> rows_by_class;
  for (int i = 0; i < batch.size(); ++i) {
    rows_by_class[batch.labels[i]].push_back(i);
  }

  IntraClassVariance out;
  double sum = 0.0;
  int classes = 0;
  for (const auto& [cls, rows] : rows_by_class) {
    if (rows.size() < 2) {
      out.excluded_classes.push_back(cls);
      continue;
    }
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(batch.dim());
    for (int r : rows) mean += batch.features.row(r);
    mean /= static_cast<double>(rows.size());
    double var_sum = 0.0;
    for (int r : rows) {
      var_sum += (batch.features.row(r) - mean).squaredNorm();
    }
    // Population variance per dimension, averaged over dimensions.
    sum += var_sum / (static_cast<double>(rows.size()) * batch.dim());
    ++classes;
  }
  if (classes == 0) {
    throw InvalidInput("no class has at least two samples");
  }
  out.value = sum / classes;
  return out;
}

double knn_accuracy(const EmbeddingBatch& support, const EmbeddingBatch& queries,
                    int k) {
  validate_batch(support);
  validate_batch(queries);
  const std::vector<int> predicted =
      knn_classify(support.features, support.labels, queries.features, k);
  int correct = 0;
  for (int q = 0; q < queries.size(); ++q) {
    if (predicted[q] == queries.labels[q]) ++correct;
  }
  return 100.0 * correct / queries.size();
}

}  // namespace casper
