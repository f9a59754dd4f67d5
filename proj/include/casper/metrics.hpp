#pragma once

#include "casper/graph.hpp"
#include "casper/types.hpp"

#include <optional>
#include <vector>

namespace casper {

/// Task-by-task accuracy table: entry(i, j) is the accuracy (percent) on
/// task i's test set measured after training on task j, defined for i <= j
/// (0-based indices).
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(int tasks);

  int tasks() const { return tasks_; }
  void set(int task, int checkpoint, double percent);
  double at(int task, int checkpoint) const;
  bool complete_column(int checkpoint) const;

 private:
  int tasks_;
  Matrix values_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> filled_;
};

/// Mean of the final column: the average accuracy over all tasks after the
/// last checkpoint.
double final_average_accuracy(const AccuracyMatrix& m);

/// Bounded forgetting: mean over tasks i < T of the drop from the task's
/// pre-final peak to its final accuracy, as a fraction of that peak, scaled
/// to [0, 100]. Improvements count as zero drop. Undefined for T = 1.
std::optional<double> adjusted_forgetting(const AccuracyMatrix& m);

/// Total adjacency weight between nodes of different classes,
///   sigma = sum_i sum_j [y_i != y_j] a_ij,
/// summed over ordered pairs so each undirected cross-class edge counts
/// twice. Lower means better class separation in the graph.
double label_signal_variation(const LatentGraph& g);

struct IntraClassVariance {
  double value = 0.0;
  std::vector<int> excluded_classes;  // classes with a single sample
};

/// Per class: mean over dimensions of the population variance of that
/// class's feature vectors; averaged over classes. Classes with fewer than
/// two samples are excluded and reported.
IntraClassVariance intra_class_variance(const EmbeddingBatch& batch);

/// Percent of queries whose k-NN vote (support set as neighbours) matches
/// their own label.
double knn_accuracy(const EmbeddingBatch& support, const EmbeddingBatch& queries,
                    int k);

}  // namespace casper
