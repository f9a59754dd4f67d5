#include "casper/replay.hpp"

#include "casper/data.hpp"
#include "casper/graph.hpp"
#include "casper/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace casper {

Method method_from_string(const std::string& name) {
  if (name == "finetune") return Method::kFinetune;
  if (name == "er") return Method::kEr;
  if (name == "er_casper") return Method::kErCasper;
  if (name == "joint") return Method::kJoint;
  throw ConfigError("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kFinetune: return "finetune";
    case Method::kEr: return "er";
    case Method::kErCasper: return "er_casper";
    case Method::kJoint: return "joint";
  }
  return "unknown";
}

bool uses_replay(Method method) {
  return method == Method::kEr || method == Method::kErCasper;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs_per_task < 1) throw ConfigError("epochs_per_task must be positive");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  casper.validate();
}

void reservoir_update(ReplayBuffer& buffer, const Vector& input, int label,
                      Rng& rng) {
  ++buffer.seen_count;
  if (buffer.size() < buffer.capacity) {
    buffer.items.push_back(BufferItem{input, label});
    return;
  }
  const double accept =
      static_cast<double>(buffer.capacity) / buffer.seen_count;
  if (rng.next_double() < accept) {
    const std::size_t slot = rng.next_index(buffer.items.size());
    buffer.items[slot] = BufferItem{input, label};
  }
}

namespace {

Matrix gather_rows(const Matrix& source, const std::vector<int>& rows) {
  Matrix out(rows.size(), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(i) = source.row(rows[i]);
  }
  return out;
}

Matrix buffer_inputs(const ReplayBuffer& buffer) {
  Matrix out(buffer.size(), buffer.items.front().input.size());
  for (int i = 0; i < buffer.size(); ++i) {
    out.row(i) = buffer.items[i].input.transpose();
  }
  return out;
}

std::vector<int> buffer_labels(const ReplayBuffer& buffer) {
  std::vector<int> labels(buffer.size());
  for (int i = 0; i < buffer.size(); ++i) labels[i] = buffer.items[i].label;
  return labels;
}

// Count of classes holding at least t buffer items; lets the step skip the
// regularizer without touching its random stream.
bool casper_eligible(const ReplayBuffer& buffer, const CasperConfig& cfg) {
  std::map<int, int> counts;
  for (const BufferItem& item : buffer.items) ++counts[item.label];
  int eligible = 0;
  for (const auto& [cls, count] : counts) {
    if (count >= cfg.t) ++eligible;
  }
  return eligible >= cfg.p;
}

}  // namespace

void train_task(ModelParams& model, const Task& task, ReplayBuffer& buffer,
                const TrainConfig& cfg, int task_index,
                std::vector<StepLog>& logs, RunRngs& rngs) {
  cfg.validate();
  const double rho = cfg.casper.rho;
  const bool casper_on = cfg.method == Method::kErCasper && rho > 0.0;

  std::vector<int> order(task.size());
  for (int epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, RngStream::kShuffle,
                                static_cast<std::uint64_t>(task_index),
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (int start = 0; start < task.size(); start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, task.size() - start);
      std::vector<int> batch_rows(order.begin() + start,
                                  order.begin() + start + count);
      const Matrix batch_x = gather_rows(task.inputs, batch_rows);
      std::vector<int> batch_y(count);
      for (int i = 0; i < count; ++i) batch_y[i] = task.labels[batch_rows[i]];

      const ForwardTrace trace = forward(model, batch_x);
      const double l_stream = cross_entropy(trace.logits, batch_y);
      ParamGrads grads =
          backward(model, trace, {cross_entropy_grad(trace.logits, batch_y), {}});

      double l_b = 0.0;
      if (uses_replay(cfg.method) && buffer.size() > 0) {
        Matrix replay_x(count, batch_x.cols());
        std::vector<int> replay_y(count);
        for (int i = 0; i < count; ++i) {
          const std::size_t pick = rngs.replay.next_index(buffer.items.size());
          replay_x.row(i) = buffer.items[pick].input.transpose();
          replay_y[i] = buffer.items[pick].label;
        }
        const ForwardTrace replay_trace = forward(model, replay_x);
        l_b = cross_entropy(replay_trace.logits, replay_y);
        grads += backward(model, replay_trace,
                          {cross_entropy_grad(replay_trace.logits, replay_y), {}});
      }

      double l_casper = 0.0;
      if (casper_on && buffer.size() > 0 &&
          casper_eligible(buffer, cfg.casper)) {
        // Buffer features go through the live extractor inside this step so
        // the regularizer's gradient reaches the extractor parameters.
        const ForwardTrace buffer_trace = forward(model, buffer_inputs(buffer));
        std::map<int, std::vector<Eigen::RowVectorXd>> by_class;
        std::map<int, std::vector<int>> row_of;
        for (int i = 0; i < buffer.size(); ++i) {
          by_class[buffer.items[i].label].push_back(
              buffer_trace.features.row(i));
          row_of[buffer.items[i].label].push_back(i);
        }
        const BatchEigengapResult res =
            casper_batch_loss(by_class, cfg.casper, rngs.casper_sample);
        l_casper = res.loss;
        Matrix feature_grad =
            Matrix::Zero(buffer.size(), buffer_trace.features.cols());
        for (const auto& [key, grad_row] : res.exemplar_grads) {
          feature_grad.row(row_of.at(key.first)[key.second]) += grad_row;
        }
        grads += backward(model, buffer_trace, {{}, rho * feature_grad});
      }

      const double total = l_stream + l_b + rho * l_casper;
      if (!std::isfinite(total)) {
        throw TrainingDivergence("non-finite loss at step " +
                                 std::to_string(logs.size()));
      }
      if (!grads.all_finite()) {
        throw TrainingDivergence("non-finite gradient at step " +
                                 std::to_string(logs.size()));
      }
      sgd_step(model, grads, cfg.lr);
      logs.push_back(StepLog{static_cast<long long>(logs.size()), l_stream,
                             l_b, l_casper, total});

      if (epoch == 0) {
        for (int row : batch_rows) {
          reservoir_update(buffer, task.inputs.row(row).transpose(),
                           task.labels[row], rngs.reservoir);
        }
      }
    }
  }
}

std::vector<double> evaluate(const ModelParams& model, const TaskStream& test,
                             int upto) {
  if (upto < 0 || upto >= test.task_count()) {
    throw InvalidParameter("checkpoint index out of range");
  }
  std::vector<double> row;
  for (int i = 0; i <= upto; ++i) {
    const Task& task = test.tasks[i];
    const ForwardTrace trace = forward(model, task.inputs);
    int correct = 0;
    for (int r = 0; r < task.size(); ++r) {
      int arg = 0;
      trace.logits.row(r).maxCoeff(&arg);
      if (arg == task.labels[r]) ++correct;
    }
    row.push_back(100.0 * correct / task.size());
  }
  return row;
}

namespace {

Task merge_tasks(const TaskStream& stream) {
  int total = 0;
  for (const Task& task : stream.tasks) total += task.size();
  Task merged;
  merged.inputs = Matrix(total, stream.tasks.front().inputs.cols());
  merged.labels.reserve(total);
  int row = 0;
  for (const Task& task : stream.tasks) {
    merged.inputs.middleRows(row, task.size()) = task.inputs;
    merged.labels.insert(merged.labels.end(), task.labels.begin(),
                         task.labels.end());
    row += task.size();
  }
  return merged;
}

// Fixed probe: the first `per_class` test points of every class in the
// early tasks, in task order. The same ordered points are re-embedded at
// every checkpoint, which is what the functional-map comparison needs.
Task build_probe(const TaskStream& test, int probe_tasks, int per_class) {
  std::map<int, int> taken;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<int> labels;
  for (int t = 0; t < probe_tasks; ++t) {
    const Task& task = test.tasks[t];
    for (int r = 0; r < task.size(); ++r) {
      if (taken[task.labels[r]] < per_class) {
        ++taken[task.labels[r]];
        rows.push_back(task.inputs.row(r));
        labels.push_back(task.labels[r]);
      }
    }
  }
  Task probe;
  probe.inputs = Matrix(rows.size(), test.tasks.front().inputs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) probe.inputs.row(i) = rows[i];
  probe.labels = std::move(labels);
  return probe;
}

EmbeddingBatch embed(const ModelParams& model, const Matrix& inputs,
                     const std::vector<int>& labels) {
  return EmbeddingBatch{forward(model, inputs).features, labels};
}

}  // namespace

ExperimentReport run_experiment(const SplitStreams& streams,
                                const TrainConfig& cfg,
                                const AnalysisConfig& analysis,
                                const std::filesystem::path& out_dir) {
  cfg.validate();
  validate_stream(streams.train);
  validate_stream(streams.test);
  if (streams.train.task_count() != streams.test.task_count()) {
    throw InvalidInput("train and test streams disagree on task count");
  }

  // The joint upper bound sees every class as one offline task.
  SplitStreams merged;
  const SplitStreams* active = &streams;
  if (cfg.method == Method::kJoint && streams.train.task_count() > 1) {
    merged.train.tasks.push_back(merge_tasks(streams.train));
    merged.test.tasks.push_back(merge_tasks(streams.test));
    active = &merged;
  }
  const TaskStream& train = active->train;
  const TaskStream& test = active->test;
  const int tasks = train.task_count();

  const std::vector<int> labels = train.all_labels();
  const int num_classes = labels.back() + 1;

  MlpConfig model_cfg;
  model_cfg.input_dim = static_cast<int>(train.tasks.front().inputs.cols());
  model_cfg.hidden = cfg.hidden;
  model_cfg.num_classes = num_classes;
  Rng init_rng(derive_seed(cfg.seed, RngStream::kModelInit));
  ModelParams model = init_params(model_cfg, init_rng);

  ReplayBuffer buffer(cfg.buffer_capacity);
  RunRngs rngs(cfg.seed);

  ExperimentReport report;
  report.accuracy = AccuracyMatrix(tasks);
  report.probe_tasks = (tasks + 1) / 2;
  const Task probe =
      build_probe(test, report.probe_tasks, analysis.probe_points_per_class);

  for (int j = 0; j < tasks; ++j) {
    train_task(model, train.tasks[j], buffer, cfg, j, report.steps, rngs);

    const std::vector<double> row = evaluate(model, test, j);
    for (int i = 0; i <= j; ++i) report.accuracy.set(i, j, row[i]);

    EmbeddingBatch buffer_batch =
        embed(model, buffer_inputs(buffer), buffer_labels(buffer));
    double sigma = std::numeric_limits<double>::quiet_NaN();
    if (buffer_batch.size() > analysis.k) {
      sigma = label_signal_variation(build_knn_graph(buffer_batch, analysis.k));
    }
    report.sigma_per_task.push_back(sigma);
    report.buffer_snapshots.push_back(std::move(buffer_batch));
    report.probe_snapshots.push_back(embed(model, probe.inputs, probe.labels));
  }

  report.final_average_accuracy = final_average_accuracy(report.accuracy);
  report.adjusted_forgetting = adjusted_forgetting(report.accuracy);

  // Final-latent diagnostics on the whole test set.
  const Task all_test = merge_tasks(test);
  const EmbeddingBatch test_batch = embed(model, all_test.inputs, all_test.labels);
  report.intra_class_variance = intra_class_variance(test_batch).value;
  const EmbeddingBatch& support = report.buffer_snapshots.back();
  for (int k : analysis.knn_ks) {
    if (k <= support.size()) {
      report.knn_accuracy[k] = knn_accuracy(support, test_batch, k);
    }
  }
  report.final_model = std::move(model);

  if (!out_dir.empty()) {
    write_experiment_report(report, out_dir);
  }
  return report;
}

}  // namespace casper
