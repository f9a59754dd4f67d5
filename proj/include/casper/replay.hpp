#pragma once

#include "casper/data.hpp"
#include "casper/learner.hpp"
#include "casper/metrics.hpp"
#include "casper/rng.hpp"
#include "casper/spectral.hpp"
#include "casper/stream.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace casper {

enum class Method { kFinetune, kEr, kErCasper, kJoint };

Method method_from_string(const std::string& name);
std::string to_string(Method method);
bool uses_replay(Method method);

/// Fixed-capacity store of (input, label) pairs kept uniform over the
/// stream by reservoir sampling.
struct BufferItem {
  Vector input;
  int label = 0;
};

struct ReplayBuffer {
  explicit ReplayBuffer(int capacity_) : capacity(capacity_) {}

  int capacity;
  std::vector<BufferItem> items;
  long long seen_count = 0;

  int size() const { return static_cast<int>(items.size()); }
};

/// Classic reservoir step: append while below capacity, otherwise replace a
/// uniformly random slot with probability capacity / (seen_count + 1).
void reservoir_update(ReplayBuffer& buffer, const Vector& input, int label,
                      Rng& rng);

/// Diagnostics configuration: the LGG parameter used for sigma / functional
/// map analyses, the probe set size, and the k-NN table entries.
struct AnalysisConfig {
  int k = 5;
  int fmap_r = 25;
  double fmap_threshold = 0.15;
  int probe_points_per_class = 20;
  std::vector<int> knn_ks = {5, 11};
};

struct TrainConfig {
  double lr = 0.05;
  int batch_size = 32;
  int epochs_per_task = 30;
  int buffer_capacity = 100;
  CasperConfig casper;
  std::uint64_t seed = 1;
  Method method = Method::kEr;
  std::vector<int> hidden = {64, 32};

  void validate() const;
};

/// Loss components of one optimizer step. `total` is the objective the
/// step descended: l_stream + l_b + rho * l_casper.
struct StepLog {
  long long step = 0;
  double l_stream = 0.0;
  double l_b = 0.0;
  double l_casper = 0.0;
  double total = 0.0;
};

/// Per-run random streams. Reservoir, replay and regularizer draws are kept
/// on separate engines so disabling the regularizer cannot shift the others.
struct RunRngs {
  explicit RunRngs(std::uint64_t seed)
      : root(seed),
        reservoir(derive_seed(seed, RngStream::kReservoir)),
        replay(derive_seed(seed, RngStream::kReplayDraw)),
        casper_sample(derive_seed(seed, RngStream::kCasperSample)) {}

  std::uint64_t root;
  Rng reservoir;
  Rng replay;
  Rng casper_sample;
};

/// One task of class-incremental training: per epoch, shuffled stream
/// mini-batches; per step, the stream cross-entropy, plus a same-sized
/// replay batch's cross-entropy when replay is on, plus the spectral
/// regularizer on live buffer features when enabled; one SGD step on the
/// summed objective. Stream items enter the reservoir exactly once, on the
/// first epoch, after the step that consumed them. Steps where fewer than p
/// classes hold t exemplars log l_casper = 0.
void train_task(ModelParams& model, const Task& task, ReplayBuffer& buffer,
                const TrainConfig& cfg, int task_index,
                std::vector<StepLog>& logs, RunRngs& rngs);

/// Class-incremental evaluation after checkpoint `upto`: accuracy percent
/// on each test task i <= upto, arg-maxing over all class logits with no
/// task oracle.
std::vector<double> evaluate(const ModelParams& model, const TaskStream& test,
                             int upto);

struct ExperimentReport {
  AccuracyMatrix accuracy{1};
  double final_average_accuracy = 0.0;
  std::optional<double> adjusted_forgetting;
  std::vector<double> sigma_per_task;  // NaN where the buffer was too small
  double intra_class_variance = 0.0;
  std::map<int, double> knn_accuracy;  // k -> percent
  std::vector<StepLog> steps;
  std::vector<EmbeddingBatch> buffer_snapshots;  // after each task
  std::vector<EmbeddingBatch> probe_snapshots;   // fixed early-task points
  ModelParams final_model;
  int probe_tasks = 0;  // probe spans test tasks [0, probe_tasks)
};

/// Runs the full protocol: sequential train_task over the stream (merged to
/// a single task for the joint method), evaluation after every task, latent
/// snapshots of the buffer and of a fixed early-task probe set, and final
/// diagnostics. Fully reproducible from cfg.seed. When `out_dir` is
/// non-empty the report is also serialized there.
ExperimentReport run_experiment(const SplitStreams& streams,
                                const TrainConfig& cfg,
                                const AnalysisConfig& analysis,
                                const std::filesystem::path& out_dir = {});

}  // namespace casper
