#pragma once

#include "casper/replay.hpp"
#include "casper/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace casper {

/// Shortest decimal string that parses back to exactly the same double.
/// All numeric CSV/JSON output goes through this so identical runs produce
/// byte-identical files.
std::string format_double(double value);

/// Writes `label,f0..f{d-1}` rows.
void write_embedding_csv(const EmbeddingBatch& batch,
                         const std::filesystem::path& path);
EmbeddingBatch read_embedding_csv(const std::filesystem::path& path);

/// Serializes the numeric artifacts of one run into `dir`:
/// accuracy_matrix.csv, metrics.json, loss_log.csv,
/// buffer_snapshots/task_<i>.csv, test_snapshots/task_<i>.csv, model.json.
void write_experiment_report(const ExperimentReport& report,
                             const std::filesystem::path& dir);

struct SummaryRow {
  std::string method;
  std::uint64_t seed = 0;
  double final_average_accuracy = 0.0;
  std::optional<double> adjusted_forgetting;
  double final_sigma = 0.0;
  std::map<int, double> knn_accuracy;
  double intra_class_variance = 0.0;
};

/// Aggregate table across runs; one row per (method, seed), k-NN columns
/// taken from the configured k list. Undefined forgetting prints empty.
void write_summary_csv(const std::vector<SummaryRow>& rows,
                       const std::vector<int>& knn_ks,
                       const std::filesystem::path& path);

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

}  // namespace casper
