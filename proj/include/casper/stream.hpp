#pragma once

#include "casper/types.hpp"

#include <set>
#include <vector>

namespace casper {

/// One task of a class-incremental stream: inputs with labels drawn from a
/// label set disjoint from every other task's.
struct Task {
  Matrix inputs;            // rows are examples
  std::vector<int> labels;

  int size() const { return static_cast<int>(inputs.rows()); }
};

/// Ordered tasks with pairwise-disjoint label sets.
struct TaskStream {
  std::vector<Task> tasks;

  int task_count() const { return static_cast<int>(tasks.size()); }

  /// Distinct labels across all tasks, ascending.
  std::vector<int> all_labels() const;
};

/// Checks the class-incremental contract: every task non-empty, labels
/// non-negative, label sets pairwise disjoint.
void validate_stream(const TaskStream& stream);

}  // namespace casper
