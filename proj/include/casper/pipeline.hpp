#pragma once

#include "casper/config.hpp"
#include "casper/report_io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace casper {

inline constexpr const char* kVersionString = "casper-lab-0.1.0";

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  ExperimentReport report;
};

/// Runs every configured method for every seed on the shared dataset, all
/// below `out_root`: <out_root>/<method>_seed<seed>/ per run, plus
/// summary.csv and manifest.json at the root. The manifest carries
/// timestamps; every other artifact is a pure function of the config.
std::vector<RunResult> run_benchmark(const FullConfig& config,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::filesystem::path& out_root);

/// Expands arguments into run directories: a directory containing
/// config.json is a run, otherwise its immediate children are scanned.
std::vector<std::filesystem::path> collect_run_dirs(
    const std::vector<std::filesystem::path>& args);

/// Post-hoc analysis over report directories. Emits plot-ready long-format
/// tables: sigma_curve.csv (per-task class-mixing, mean +- std per method),
/// knn_table.csv, fmap_summary.csv plus per-run functional-map artifacts
/// comparing the mid-stream and final checkpoints. Runs with a single task
/// are refused for the functional-map comparison.
struct AnalyzeOutcome {
  std::vector<std::string> fmap_refusals;  // human-readable, per refused run
};

AnalyzeOutcome analyze_runs(const std::vector<std::filesystem::path>& run_dirs,
                            const std::filesystem::path& out_dir);

}  // namespace casper
