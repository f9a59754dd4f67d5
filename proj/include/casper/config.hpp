#pragma once

#include "casper/data.hpp"
#include "casper/replay.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace casper {

/// One TOML value: scalar or (possibly nested) array.
struct TomlValue {
  std::variant<bool, long long, double, std::string,
               std::vector<TomlValue>> data;
  int line = 0;

  bool is_array() const {
    return std::holds_alternative<std::vector<TomlValue>>(data);
  }
};

/// Flattened table: `[section]` headers and dotted keys collapse to
/// "section.key" paths.
using TomlTable = std::map<std::string, TomlValue>;

/// Parses the TOML subset used by the manifests: comments, [section]
/// headers, dotted bare keys, strings, booleans, integers, floats and
/// single-line (possibly nested) arrays. Errors carry line numbers.
TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::filesystem::path& path);

/// Applies a `section.key=value` override; the value uses TOML syntax.
void apply_override(TomlTable& table, const std::string& assignment);

/// Everything a benchmark run needs, resolved and defaulted.
struct FullConfig {
  DatasetConfig data;
  TrainConfig train;  // seed/method overwritten per run by the driver
  AnalysisConfig analysis;
  std::vector<Method> methods = {Method::kEr, Method::kErCasper,
                                 Method::kFinetune, Method::kJoint};
};

/// Maps the table onto FullConfig, validating types and ranges. Unknown
/// keys are an error naming the key.
FullConfig resolve_config(const TomlTable& table);

FullConfig load_config(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides);

/// Resolved config as JSON (used for per-run config.json and the manifest).
std::string config_to_json(const FullConfig& config, Method method,
                           std::uint64_t seed);

/// "1..5" (inclusive range) or "1,2,3" comma list.
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec);

}  // namespace casper
