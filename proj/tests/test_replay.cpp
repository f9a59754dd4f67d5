#include "casper/replay.hpp"

#include "casper/data.hpp"
#include "casper/stats.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace casper;

namespace {

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

DatasetConfig tiny_blobs(double separation = 8.0, double noise = 0.6) {
  DatasetConfig cfg;
  cfg.classes = 4;
  cfg.input_dim = 6;
  cfg.train_per_class = 24;
  cfg.test_per_class = 16;
  cfg.separation = separation;
  cfg.noise = noise;
  cfg.tasks = 2;
  cfg.classes_per_task = 2;
  cfg.seed = 5;
  return cfg;
}

// Clusters close enough that the extractor shares units across classes;
// this is the regime where sequential training interferes.
DatasetConfig overlapping_blobs() { return tiny_blobs(2.0, 1.0); }

TrainConfig tiny_train(Method method) {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.batch_size = 16;
  cfg.epochs_per_task = 8;
  cfg.buffer_capacity = 40;
  cfg.hidden = {16, 8};
  cfg.seed = 3;
  cfg.method = method;
  cfg.casper.rho = method == Method::kErCasper ? 0.25 : 0.0;
  cfg.casper.p = 2;
  cfg.casper.t = 4;
  cfg.casper.mc_samples = 1;
  cfg.casper.k = 3;
  return cfg;
}

AnalysisConfig tiny_analysis() {
  AnalysisConfig cfg;
  cfg.k = 3;
  cfg.fmap_r = 8;
  cfg.probe_points_per_class = 8;
  cfg.knn_ks = {1, 5};
  return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return a.head_weight == b.head_weight && a.head_bias == b.head_bias;
}

}  // namespace

TEST_CASE("reservoir keeps the first m offers verbatim") {
  ReplayBuffer buffer(5);
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    reservoir_update(buffer, vec1(i), i, rng);
    CHECK(buffer.size() == i + 1);
  }
  for (int i = 0; i < 5; ++i) {
    CHECK(buffer.items[i].input(0) == static_cast<double>(i));
    CHECK(buffer.items[i].label == i);
  }
  CHECK(buffer.seen_count == 5);
}

TEST_CASE("reservoir size never exceeds capacity") {
  ReplayBuffer buffer(7);
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    reservoir_update(buffer, vec1(i), i % 3, rng);
    CHECK(buffer.size() <= 7);
  }
  CHECK(buffer.seen_count == 300);
}

TEST_CASE("reservoir trace: m=1, the second offer replaces when u < 1/2") {
  // find a seed whose first probability draw is below 1/2 and trace it
  std::uint64_t seed = 0;
  for (;; ++seed) {
    Rng probe(seed);
    if (probe.next_double() < 0.5) break;
  }
  ReplayBuffer buffer(1);
  Rng rng(seed);
  reservoir_update(buffer, vec1(10), 0, rng);
  reservoir_update(buffer, vec1(20), 1, rng);
  CHECK(buffer.items[0].input(0) == 20.0);

  // and a seed whose first draw is >= 1/2 keeps the first item
  std::uint64_t keep_seed = 0;
  for (;; ++keep_seed) {
    Rng probe(keep_seed);
    if (probe.next_double() >= 0.5) break;
  }
  ReplayBuffer kept(1);
  Rng keep_rng(keep_seed);
  reservoir_update(kept, vec1(10), 0, keep_rng);
  reservoir_update(kept, vec1(20), 1, keep_rng);
  CHECK(kept.items[0].input(0) == 10.0);
}

TEST_CASE("reservoir inclusion frequencies pass the chi-square gate") {
  const int capacity = 10, stream_len = 200, trials = 10000;
  std::vector<long long> inclusion(stream_len, 0);
  for (int trial = 0; trial < trials; ++trial) {
    ReplayBuffer buffer(capacity);
    Rng rng(derive_seed(9000, RngStream::kReservoir, trial));
    for (int i = 0; i < stream_len; ++i) {
      reservoir_update(buffer, vec1(i), 0, rng);
    }
    for (const BufferItem& item : buffer.items) {
      ++inclusion[static_cast<int>(item.input(0))];
    }
  }
  const Chi2Uniformity chi = chi2_uniformity_test(inclusion, 0.01);
  CHECK(chi.dof == stream_len - 1);
  CHECK(chi.pass);
}

TEST_CASE("finetune forgets the first task") {
  const SplitStreams streams = generate(overlapping_blobs());
  TrainConfig cfg = tiny_train(Method::kFinetune);
  cfg.epochs_per_task = 20;
  const ExperimentReport report =
      run_experiment(streams, cfg, tiny_analysis());
  // after task 2, task 1 accuracy collapses
  CHECK(report.accuracy.at(0, 1) <= 20.0);
  CHECK(report.accuracy.at(1, 1) >= 80.0);
  CHECK(*report.adjusted_forgetting >= 80.0);
}

TEST_CASE("a full-stream buffer approaches joint accuracy") {
  const SplitStreams streams = generate(overlapping_blobs());
  TrainConfig er = tiny_train(Method::kEr);
  er.epochs_per_task = 20;
  er.buffer_capacity = 10000;  // holds every stream item
  const ExperimentReport er_report =
      run_experiment(streams, er, tiny_analysis());
  TrainConfig joint = tiny_train(Method::kJoint);
  joint.epochs_per_task = 20;
  const ExperimentReport joint_report =
      run_experiment(streams, joint, tiny_analysis());
  CHECK(er_report.final_average_accuracy >=
        joint_report.final_average_accuracy - 5.0);
}

TEST_CASE("first steps of the first task have no replay or casper loss") {
  const SplitStreams streams = generate(tiny_blobs());
  const ExperimentReport report = run_experiment(
      streams, tiny_train(Method::kErCasper), tiny_analysis());
  CHECK(report.steps.front().l_b == 0.0);
  CHECK(report.steps.front().l_casper == 0.0);
  CHECK(report.steps.front().total == report.steps.front().l_stream);
}

TEST_CASE("logged components recompose the step objective exactly") {
  const SplitStreams streams = generate(tiny_blobs());
  const TrainConfig cfg = tiny_train(Method::kErCasper);
  const ExperimentReport report =
      run_experiment(streams, cfg, tiny_analysis());
  bool saw_casper = false;
  for (const StepLog& step : report.steps) {
    CHECK(step.total ==
          step.l_stream + step.l_b + cfg.casper.rho * step.l_casper);
    if (step.l_casper != 0.0) saw_casper = true;
  }
  CHECK(saw_casper);
}

TEST_CASE("evaluate: perfect model on train=test toy data scores 100") {
  SplitStreams streams = generate(tiny_blobs());
  streams.test = streams.train;  // evaluate on the training data
  TrainConfig cfg = tiny_train(Method::kJoint);
  cfg.epochs_per_task = 60;
  const ExperimentReport report =
      run_experiment(streams, cfg, tiny_analysis());
  CHECK(report.final_average_accuracy >= 99.0);
}

TEST_CASE("evaluate: random heads hover near chance on average") {
  const DatasetConfig data_cfg = tiny_blobs();  // C = 4 classes
  const SplitStreams streams = generate(data_cfg);
  double total = 0.0;
  const int trials = 24;
  for (int trial = 0; trial < trials; ++trial) {
    MlpConfig mc;
    mc.input_dim = data_cfg.input_dim;
    mc.hidden = {16, 8};
    mc.num_classes = 4;
    Rng rng(500 + trial);
    const ModelParams random_model = init_params(mc, rng);
    const std::vector<double> row = evaluate(random_model, streams.test, 1);
    total += (row[0] + row[1]) / 2.0;
  }
  CHECK(total / trials == doctest::Approx(25.0).epsilon(0.25));
}

TEST_CASE("joint runs collapse to one task with undefined forgetting") {
  const SplitStreams streams = generate(tiny_blobs());
  const ExperimentReport report = run_experiment(
      streams, tiny_train(Method::kJoint), tiny_analysis());
  CHECK(report.accuracy.tasks() == 1);
  CHECK(!report.adjusted_forgetting.has_value());
  CHECK(report.final_average_accuracy == report.accuracy.at(0, 0));
}

TEST_CASE("same seed twice gives bit-identical reports on disk") {
  namespace fs = std::filesystem;
  const SplitStreams streams = generate(tiny_blobs());
  const TrainConfig cfg = tiny_train(Method::kErCasper);
  const fs::path base =
      fs::temp_directory_path() / "casper_replay_determinism";
  fs::remove_all(base);
  run_experiment(streams, cfg, tiny_analysis(), base / "a");
  run_experiment(streams, cfg, tiny_analysis(), base / "b");

  const std::vector<std::string> files{
      "accuracy_matrix.csv", "metrics.json", "loss_log.csv",
      "buffer_snapshots/task_2.csv", "test_snapshots/task_1.csv",
      "model.json"};
  for (const std::string& name : files) {
    std::ifstream fa(base / "a" / name), fb(base / "b" / name);
    REQUIRE(fa.good());
    REQUIRE(fb.good());
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
  }
  fs::remove_all(base);
}

TEST_CASE("rho=0 casper path is bit-identical to plain er") {
  const SplitStreams streams = generate(tiny_blobs());
  TrainConfig er = tiny_train(Method::kEr);
  TrainConfig casper_off = tiny_train(Method::kErCasper);
  casper_off.casper.rho = 0.0;

  const ExperimentReport a = run_experiment(streams, er, tiny_analysis());
  const ExperimentReport b =
      run_experiment(streams, casper_off, tiny_analysis());

  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].l_stream == b.steps[i].l_stream);
    CHECK(a.steps[i].l_b == b.steps[i].l_b);
    CHECK(a.steps[i].l_casper == 0.0);
    CHECK(b.steps[i].l_casper == 0.0);
  }
  for (int i = 0; i < a.accuracy.tasks(); ++i) {
    for (int j = i; j < a.accuracy.tasks(); ++j) {
      CHECK(a.accuracy.at(i, j) == b.accuracy.at(i, j));
    }
  }
  CHECK(params_equal(a.final_model, b.final_model));
}

TEST_CASE("buffer stays within capacity through a whole run") {
  const SplitStreams streams = generate(tiny_blobs());
  TrainConfig cfg = tiny_train(Method::kEr);
  cfg.buffer_capacity = 13;
  const ExperimentReport report =
      run_experiment(streams, cfg, tiny_analysis());
  for (const EmbeddingBatch& snapshot : report.buffer_snapshots) {
    CHECK(snapshot.size() <= 13);
  }
  // after 96 task-1 offers the reservoir is full
  CHECK(report.buffer_snapshots.front().size() == 13);
}

TEST_CASE("train_task consumes stream items only from its own task") {
  const SplitStreams streams = generate(tiny_blobs());
  validate_stream(streams.train);
  // the harness API takes a single task; the stream-side contract is the
  // disjointness of task label sets, checked above, plus buffer-only reuse:
  TrainConfig cfg = tiny_train(Method::kFinetune);
  ModelParams model = [&] {
    MlpConfig mc;
    mc.input_dim = 6;
    mc.hidden = cfg.hidden;
    mc.num_classes = 4;
    Rng rng(derive_seed(cfg.seed, RngStream::kModelInit));
    return init_params(mc, rng);
  }();
  ReplayBuffer buffer(cfg.buffer_capacity);
  RunRngs rngs(cfg.seed);
  std::vector<StepLog> logs;
  train_task(model, streams.train.tasks[0], buffer, cfg, 0, logs, rngs);
  std::set<int> buffered;
  for (const BufferItem& item : buffer.items) buffered.insert(item.label);
  const std::set<int> task_labels(streams.train.tasks[0].labels.begin(),
                                  streams.train.tasks[0].labels.end());
  for (int label : buffered) CHECK(task_labels.count(label) == 1);
  CHECK(buffer.seen_count == streams.train.tasks[0].size());
}
