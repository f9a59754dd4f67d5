#include "casper/pipeline.hpp"

#include "casper/fmap.hpp"
#include "casper/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace casper {

namespace fs = std::filesystem;

std::vector<RunResult> run_benchmark(const FullConfig& config,
                                     const std::vector<std::uint64_t>& seeds,
                                     const fs::path& out_root) {
  if (seeds.empty()) throw ConfigError("no seeds given");
  fs::create_directories(out_root);

  const SplitStreams streams = generate(config.data);

  std::vector<RunResult> results;
  std::vector<SummaryRow> rows;
  for (const Method method : config.methods) {
    for (const std::uint64_t seed : seeds) {
      TrainConfig train = config.train;
      train.method = method;
      train.seed = seed;
      const fs::path dir =
          out_root / (to_string(method) + "_seed" + std::to_string(seed));
      RunResult result;
      result.method = to_string(method);
      result.seed = seed;
      result.dir = dir;
      result.report = run_experiment(streams, train, config.analysis, dir);
      {
        std::ofstream out(dir / "config.json");
        out << config_to_json(config, method, seed);
      }
      SummaryRow row;
      row.method = result.method;
      row.seed = seed;
      row.final_average_accuracy = result.report.final_average_accuracy;
      row.adjusted_forgetting = result.report.adjusted_forgetting;
      row.final_sigma = result.report.sigma_per_task.back();
      row.knn_accuracy = result.report.knn_accuracy;
      row.intra_class_variance = result.report.intra_class_variance;
      rows.push_back(std::move(row));
      results.push_back(std::move(result));
    }
  }
  write_summary_csv(rows, config.analysis.knn_ks, out_root / "summary.csv");

  nlohmann::json manifest;
  manifest["version"] = kVersionString;
  manifest["config"] =
      nlohmann::json::parse(config_to_json(config, config.methods.front(), 0));
  manifest["config"].erase("method");
  manifest["config"].erase("seed");
  nlohmann::json method_names = nlohmann::json::array();
  for (const Method m : config.methods) method_names.push_back(to_string(m));
  manifest["methods"] = method_names;
  manifest["seeds"] = seeds;
  manifest["created_unix_time"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  nlohmann::json layout = nlohmann::json::array();
  for (const RunResult& r : results) {
    layout.push_back(r.dir.filename().string());
  }
  manifest["run_dirs"] = layout;
  std::ofstream out(out_root / "manifest.json");
  out << manifest.dump(2) << "\n";

  return results;
}

std::vector<fs::path> collect_run_dirs(const std::vector<fs::path>& args) {
  std::vector<fs::path> dirs;
  for (const fs::path& arg : args) {
    if (!fs::is_directory(arg)) {
      throw std::runtime_error("not a directory: " + arg.string());
    }
    if (fs::exists(arg / "config.json")) {
      dirs.push_back(arg);
      continue;
    }
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(arg)) {
      if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
        children.push_back(entry.path());
      }
    }
    std::sort(children.begin(), children.end());
    dirs.insert(dirs.end(), children.begin(), children.end());
  }
  if (dirs.empty()) {
    throw std::runtime_error("no report directories (config.json) found");
  }
  return dirs;
}

namespace {

struct LoadedRun {
  std::string method;
  std::uint64_t seed = 0;
  fs::path dir;
  std::vector<double> sigma_per_task;
  std::map<int, double> knn;
  int probe_tasks = 0;
  int tasks = 0;
  int analysis_k = 5;
  int fmap_r = 25;
  double fmap_threshold = 0.15;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.dir = dir;
  std::ifstream cfg_in(dir / "config.json");
  if (!cfg_in) throw std::runtime_error("missing " + (dir / "config.json").string());
  nlohmann::json cfg;
  cfg_in >> cfg;
  run.method = cfg.at("method").get<std::string>();
  run.seed = cfg.at("seed").get<std::uint64_t>();
  run.analysis_k = cfg.at("analysis").at("k").get<int>();
  run.fmap_r = cfg.at("analysis").at("fmap_r").get<int>();
  run.fmap_threshold = cfg.at("analysis").at("fmap_threshold").get<double>();

  std::ifstream metrics_in(dir / "metrics.json");
  if (!metrics_in) {
    throw std::runtime_error("missing " + (dir / "metrics.json").string());
  }
  nlohmann::json metrics;
  metrics_in >> metrics;
  for (const auto& v : metrics.at("sigma_per_task")) {
    run.sigma_per_task.push_back(
        v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                    : v.get<double>());
  }
  run.tasks = static_cast<int>(run.sigma_per_task.size());
  run.probe_tasks = metrics.at("probe_tasks").get<int>();
  for (const auto& [key, value] : metrics.at("knn_accuracy").items()) {
    run.knn[std::stoi(key)] = value.get<double>();
  }
  return run;
}

void write_matrix_csv(const Matrix& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ",";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
}

void append_mean_std(std::ofstream& out, const std::vector<double>& values) {
  out << format_double(mean_of(values)) << ",";
  out << format_double(values.size() > 1 ? sample_std(values) : 0.0);
}

}  // namespace

AnalyzeOutcome analyze_runs(const std::vector<fs::path>& run_dirs,
                            const fs::path& out_dir) {
  std::vector<LoadedRun> runs;
  for (const fs::path& dir : run_dirs) runs.push_back(load_run(dir));
  std::sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
    return std::tie(a.method, a.seed) < std::tie(b.method, b.seed);
  });

  fs::create_directories(out_dir);
  AnalyzeOutcome outcome;

  // sigma_curve.csv: long format, one row per (method, task).
  {
    std::map<std::string, std::map<int, std::vector<double>>> by_method;
    for (const LoadedRun& run : runs) {
      for (int t = 0; t < run.tasks; ++t) {
        if (std::isfinite(run.sigma_per_task[t])) {
          by_method[run.method][t].push_back(run.sigma_per_task[t]);
        }
      }
    }
    std::ofstream out(out_dir / "sigma_curve.csv");
    out << "method,task,sigma_mean,sigma_std\n";
    for (const auto& [method, per_task] : by_method) {
      for (const auto& [task, values] : per_task) {
        out << method << "," << (task + 1) << ",";
        append_mean_std(out, values);
        out << "\n";
      }
    }
  }

  // knn_table.csv: one row per (method, k).
  {
    std::map<std::string, std::map<int, std::vector<double>>> by_method;
    for (const LoadedRun& run : runs) {
      for (const auto& [k, acc] : run.knn) by_method[run.method][k].push_back(acc);
    }
    std::ofstream out(out_dir / "knn_table.csv");
    out << "method,k,accuracy_mean,accuracy_std\n";
    for (const auto& [method, per_k] : by_method) {
      for (const auto& [k, values] : per_k) {
        out << method << "," << k << ",";
        append_mean_std(out, values);
        out << "\n";
      }
    }
  }

  // Functional maps: mid-stream vs final checkpoint on the probe points.
  {
    std::ofstream summary(out_dir / "fmap_summary.csv");
    summary << "method,seed,od_e,degenerate\n";
    for (const LoadedRun& run : runs) {
      if (run.tasks < 2) {
        outcome.fmap_refusals.push_back(
            run.dir.filename().string() +
            ": functional-map comparison needs at least two checkpoints, run "
            "has a single task");
        continue;
      }
      const fs::path mid_path =
          run.dir / "test_snapshots" /
          ("task_" + std::to_string(run.probe_tasks) + ".csv");
      const fs::path final_path =
          run.dir / "test_snapshots" /
          ("task_" + std::to_string(run.tasks) + ".csv");
      std::vector<std::string> missing;
      if (!fs::exists(mid_path)) missing.push_back(mid_path.string());
      if (!fs::exists(final_path)) missing.push_back(final_path.string());
      if (!missing.empty()) {
        std::string names;
        for (const std::string& name : missing) {
          if (!names.empty()) names += ", ";
          names += name;
        }
        throw std::runtime_error("missing snapshots: " + names);
      }
      const EmbeddingBatch mid = read_embedding_csv(mid_path);
      const EmbeddingBatch fin = read_embedding_csv(final_path);
      const int r = std::min(run.fmap_r, mid.size());
      const FmapReport fmap =
          fmap_report(mid, fin, run.analysis_k, r, run.fmap_threshold);

      const fs::path fmap_dir =
          out_dir / "fmap" /
          (run.method + "_seed" + std::to_string(run.seed));
      fs::create_directories(fmap_dir);
      write_matrix_csv(fmap.c_abs, fmap_dir / "fmap.csv");
      write_matrix_csv(fmap.c_display, fmap_dir / "fmap_display.csv");
      nlohmann::json meta;
      meta["od_e"] = fmap.od_e;
      meta["r"] = r;
      meta["threshold"] = run.fmap_threshold;
      meta["degenerate_indices_a"] = fmap.degenerate_a;
      meta["degenerate_indices_b"] = fmap.degenerate_b;
      std::ofstream meta_out(fmap_dir / "fmap_meta.json");
      meta_out << meta.dump(2) << "\n";

      const bool degenerate =
          !fmap.degenerate_a.empty() || !fmap.degenerate_b.empty();
      summary << run.method << "," << run.seed << ","
              << format_double(fmap.od_e) << "," << (degenerate ? 1 : 0)
              << "\n";
    }
  }
  return outcome;
}

}  // namespace casper
