#include "casper/config.hpp"
#include "casper/gradcheck.hpp"
#include "casper/pipeline.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("CASPER_OUT_ROOT")) {
    return std::filesystem::path(env);
  }
  return "runs";
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& seed_spec, const std::string& out_flag) {
  casper::FullConfig config;
  std::vector<std::uint64_t> seeds;
  try {
    config = casper::load_config(config_path, overrides);
    seeds = casper::parse_seed_spec(seed_spec);
  } catch (const casper::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  const std::filesystem::path out_root =
      out_flag.empty() ? default_out_root() : std::filesystem::path(out_flag);
  try {
    const auto results = casper::run_benchmark(config, seeds, out_root);
    for (const auto& run : results) {
      std::cout << run.method << " seed " << run.seed
                << ": accuracy " << run.report.final_average_accuracy;
      if (run.report.adjusted_forgetting) {
        std::cout << ", forgetting " << *run.report.adjusted_forgetting;
      } else {
        std::cout << ", forgetting -";
      }
      std::cout << " -> " << run.dir.string() << "\n";
    }
    std::cout << "summary: " << (out_root / "summary.csv").string() << "\n";
  } catch (const casper::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_analyze(const std::vector<std::string>& dirs, const std::string& out_flag) {
  try {
    std::vector<std::filesystem::path> args(dirs.begin(), dirs.end());
    const auto run_dirs = casper::collect_run_dirs(args);
    std::filesystem::path out =
        out_flag.empty() ? run_dirs.front().parent_path() / "analysis"
                         : std::filesystem::path(out_flag);
    const auto outcome = casper::analyze_runs(run_dirs, out);
    for (const std::string& refusal : outcome.fmap_refusals) {
      std::cerr << "fmap refused: " << refusal << "\n";
    }
    std::cout << "analysis written to " << out.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_gradcheck(int instances, std::uint64_t seed) {
  try {
    const auto start = std::chrono::steady_clock::now();
    const casper::GradCheckReport report =
        casper::run_gradcheck_suite(instances, seed);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::cout << "instances: " << report.instances
              << " (skipped degenerate: " << report.degenerate_skipped << ")\n";
    std::cout << "max relative error (features): "
              << report.max_feature_rel_error << "\n";
    std::cout << "max relative error (full model): "
              << report.max_model_rel_error << "\n";
    std::cout << "elapsed: " << elapsed << " s\n";
    const bool pass = report.max_rel_error() <= casper::kGradCheckTol;
    std::cout << (pass ? "PASS" : "FAIL") << " (tolerance "
              << casper::kGradCheckTol << ")\n";
    return pass ? kExitOk : kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-regularized rehearsal continual learning lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed_spec = "1";
  std::string out_flag;
  CLI::App* train = app.add_subcommand("train", "run the benchmark methods");
  train->add_option("--config", config_path, "TOML config file")->required();
  train->add_option("--set", overrides,
                    "override a config key, e.g. --set casper.rho=0.25");
  train->add_option("--seeds", seed_spec, "seed list: 1..5 or 1,2,3");
  train->add_option("--out", out_flag,
                    "output root (default $CASPER_OUT_ROOT or ./runs)");

  std::vector<std::string> analyze_dirs;
  std::string analyze_out;
  CLI::App* analyze =
      app.add_subcommand("analyze", "aggregate report directories");
  analyze->add_option("dirs", analyze_dirs, "run dirs or their parent")
      ->required();
  analyze->add_option("--out", analyze_out, "analysis output directory");

  int instances = 20;
  std::uint64_t gradcheck_seed = 7;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "compare analytic gradients with finite differences");
  gradcheck->add_option("--instances", instances, "random instances (>= 20)");
  gradcheck->add_option("--seed", gradcheck_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (train->parsed()) {
    return cmd_train(config_path, overrides, seed_spec, out_flag);
  }
  if (analyze->parsed()) {
    return cmd_analyze(analyze_dirs, analyze_out);
  }
  return cmd_gradcheck(instances, gradcheck_seed);
}
