#include "casper/pipeline.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace casper;
namespace fs = std::filesystem;

namespace {

FullConfig fast_config() {
  FullConfig cfg;
  cfg.data.classes = 4;
  cfg.data.input_dim = 6;
  cfg.data.train_per_class = 24;
  cfg.data.test_per_class = 16;
  cfg.data.separation = 2.0;
  cfg.data.noise = 1.0;
  cfg.data.tasks = 2;
  cfg.data.classes_per_task = 2;
  cfg.data.seed = 5;
  cfg.train.lr = 0.1;
  cfg.train.batch_size = 16;
  cfg.train.epochs_per_task = 6;
  cfg.train.buffer_capacity = 40;
  cfg.train.hidden = {16, 8};
  cfg.train.casper.rho = 0.25;
  cfg.train.casper.p = 2;
  cfg.train.casper.t = 4;
  cfg.train.casper.mc_samples = 1;
  cfg.train.casper.k = 3;
  cfg.analysis.k = 3;
  cfg.analysis.fmap_r = 8;
  cfg.analysis.probe_points_per_class = 8;
  cfg.analysis.knn_ks = {1, 5};
  cfg.methods = {Method::kEr, Method::kErCasper};
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run_benchmark lays out runs, summary and manifest") {
  const fs::path root = fs::temp_directory_path() / "casper_pipeline_basic";
  fs::remove_all(root);
  const auto results = run_benchmark(fast_config(), {1, 2}, root);
  REQUIRE(results.size() == 4);  // 2 methods x 2 seeds

  for (const RunResult& run : results) {
    CHECK(fs::exists(run.dir / "config.json"));
    CHECK(fs::exists(run.dir / "accuracy_matrix.csv"));
    CHECK(fs::exists(run.dir / "metrics.json"));
    CHECK(fs::exists(run.dir / "loss_log.csv"));
    CHECK(fs::exists(run.dir / "model.json"));
    CHECK(fs::exists(run.dir / "buffer_snapshots" / "task_2.csv"));
    CHECK(fs::exists(run.dir / "test_snapshots" / "task_1.csv"));
  }
  CHECK(fs::exists(root / "summary.csv"));
  CHECK(fs::exists(root / "manifest.json"));

  const auto rows = read_summary_csv(root / "summary.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "er");
  CHECK(rows[0].seed == 1);
  CHECK(rows[1].seed == 2);
  CHECK(rows[2].method == "er_casper");
  for (const SummaryRow& row : rows) {
    CHECK(row.final_average_accuracy > 0.0);
    CHECK(row.adjusted_forgetting.has_value());
    CHECK(row.knn_accuracy.count(5) == 1);
  }
  fs::remove_all(root);
}

TEST_CASE("rerunning the same manifest is byte-identical; rho=0 matches er") {
  FullConfig cfg = fast_config();
  cfg.methods = {Method::kEr, Method::kErCasper};
  cfg.train.casper.rho = 0.0;  // casper disabled: must reproduce er exactly

  const fs::path a = fs::temp_directory_path() / "casper_pipeline_det_a";
  const fs::path b = fs::temp_directory_path() / "casper_pipeline_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_benchmark(cfg, {3}, a);
  run_benchmark(cfg, {3}, b);

  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(slurp(a / "er_seed3" / "loss_log.csv") ==
        slurp(b / "er_seed3" / "loss_log.csv"));

  // the disabled-regularizer run equals plain er, file for file
  CHECK(slurp(a / "er_seed3" / "accuracy_matrix.csv") ==
        slurp(a / "er_casper_seed3" / "accuracy_matrix.csv"));
  CHECK(slurp(a / "er_seed3" / "loss_log.csv") ==
        slurp(a / "er_casper_seed3" / "loss_log.csv"));
  CHECK(slurp(a / "er_seed3" / "model.json") ==
        slurp(a / "er_casper_seed3" / "model.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("analyze emits the plot tables and functional-map artifacts") {
  const fs::path root = fs::temp_directory_path() / "casper_pipeline_analyze";
  fs::remove_all(root);
  run_benchmark(fast_config(), {1, 2}, root);

  const auto run_dirs = collect_run_dirs({root});
  CHECK(run_dirs.size() == 4);

  const fs::path out = root / "analysis";
  const AnalyzeOutcome outcome = analyze_runs(run_dirs, out);
  CHECK(outcome.fmap_refusals.empty());

  const std::string sigma = slurp(out / "sigma_curve.csv");
  CHECK(sigma.find("method,task,sigma_mean,sigma_std") == 0);
  CHECK(sigma.find("er,1,") != std::string::npos);
  CHECK(sigma.find("er_casper,2,") != std::string::npos);

  const std::string knn = slurp(out / "knn_table.csv");
  CHECK(knn.find("er,5,") != std::string::npos);

  const std::string fmap_summary = slurp(out / "fmap_summary.csv");
  CHECK(fmap_summary.find("method,seed,od_e,degenerate") == 0);
  CHECK(fmap_summary.find("er,1,") != std::string::npos);
  CHECK(fs::exists(out / "fmap" / "er_seed1" / "fmap.csv"));
  CHECK(fs::exists(out / "fmap" / "er_seed1" / "fmap_display.csv"));
  CHECK(fs::exists(out / "fmap" / "er_seed1" / "fmap_meta.json"));

  // determinism of the analysis layer itself
  const fs::path out2 = root / "analysis2";
  analyze_runs(run_dirs, out2);
  CHECK(slurp(out / "sigma_curve.csv") == slurp(out2 / "sigma_curve.csv"));
  CHECK(slurp(out / "fmap_summary.csv") == slurp(out2 / "fmap_summary.csv"));
  fs::remove_all(root);
}

TEST_CASE("single-task runs refuse the fmap comparison but keep sigma") {
  FullConfig cfg = fast_config();
  cfg.methods = {Method::kJoint};
  const fs::path root = fs::temp_directory_path() / "casper_pipeline_joint";
  fs::remove_all(root);
  run_benchmark(cfg, {1}, root);

  const AnalyzeOutcome outcome =
      analyze_runs(collect_run_dirs({root}), root / "analysis");
  REQUIRE(outcome.fmap_refusals.size() == 1);
  CHECK(outcome.fmap_refusals[0].find("single task") != std::string::npos);
  const std::string sigma = slurp(root / "analysis" / "sigma_curve.csv");
  CHECK(sigma.find("joint,1,") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("analyze reports missing snapshots by name") {
  const fs::path root = fs::temp_directory_path() / "casper_pipeline_missing";
  fs::remove_all(root);
  FullConfig cfg = fast_config();
  cfg.methods = {Method::kEr};
  run_benchmark(cfg, {1}, root);
  fs::remove(root / "er_seed1" / "test_snapshots" / "task_1.csv");
  CHECK_THROWS_WITH_AS(
      analyze_runs(collect_run_dirs({root}), root / "analysis"),
      doctest::Contains("task_1.csv"), std::runtime_error);
  fs::remove_all(root);
}
