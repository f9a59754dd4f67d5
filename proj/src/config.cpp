#include "casper/config.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace casper {

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    const char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t')) take();
  }
};

bool is_bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_key(Cursor& cur) {
  cur.skip_spaces();
  std::string key;
  while (!cur.done() && (is_bare_char(cur.peek()) || cur.peek() == '.')) {
    key += cur.take();
  }
  if (key.empty()) fail(cur.line, "expected a key");
  return key;
}

TomlValue parse_value(Cursor& cur);

TomlValue parse_array(Cursor& cur) {
  TomlValue value;
  value.line = cur.line;
  std::vector<TomlValue> items;
  cur.take();  // '['
  while (true) {
    cur.skip_spaces();
    if (cur.done()) fail(cur.line, "unterminated array");
    if (cur.peek() == ']') {
      cur.take();
      break;
    }
    items.push_back(parse_value(cur));
    cur.skip_spaces();
    if (!cur.done() && cur.peek() == ',') {
      cur.take();
      continue;
    }
    if (!cur.done() && cur.peek() == ']') {
      cur.take();
      break;
    }
    fail(cur.line, "expected ',' or ']' in array");
  }
  value.data = std::move(items);
  return value;
}

TomlValue parse_scalar(Cursor& cur) {
  TomlValue value;
  value.line = cur.line;
  if (cur.peek() == '"') {
    cur.take();
    std::string s;
    while (!cur.done() && cur.peek() != '"') {
      char c = cur.take();
      if (c == '\\' && !cur.done()) {
        const char esc = cur.take();
        c = esc == 'n' ? '\n' : esc == 't' ? '\t' : esc;
      }
      if (c == '\n') fail(cur.line, "unterminated string");
      s += c;
    }
    if (cur.done()) fail(cur.line, "unterminated string");
    cur.take();
    value.data = std::move(s);
    return value;
  }
  std::string token;
  while (!cur.done() && cur.peek() != ',' && cur.peek() != ']' &&
         cur.peek() != '#' && cur.peek() != '\n' && cur.peek() != '\r') {
    token += cur.take();
  }
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) {
    token.pop_back();
  }
  if (token == "true") {
    value.data = true;
    return value;
  }
  if (token == "false") {
    value.data = false;
    return value;
  }
  if (token.empty()) fail(value.line, "expected a value");
  const bool looks_float =
      token.find_first_of(".eE") != std::string::npos &&
      token.find_first_not_of("+-0123456789.eE_") == std::string::npos;
  std::string digits = token;
  digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
  if (!looks_float) {
    long long i = 0;
    const auto res =
        std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (res.ec == std::errc() && res.ptr == digits.data() + digits.size()) {
      value.data = i;
      return value;
    }
  }
  double d = 0.0;
  const auto res =
      std::from_chars(digits.data(), digits.data() + digits.size(), d);
  if (res.ec == std::errc() && res.ptr == digits.data() + digits.size()) {
    value.data = d;
    return value;
  }
  fail(value.line, "cannot parse value '" + token + "'");
}

TomlValue parse_value(Cursor& cur) {
  cur.skip_spaces();
  if (cur.done()) fail(cur.line, "expected a value");
  if (cur.peek() == '[') return parse_array(cur);
  return parse_scalar(cur);
}

void expect_line_end(Cursor& cur) {
  cur.skip_spaces();
  if (cur.done()) return;
  if (cur.peek() == '#') {
    while (!cur.done() && cur.peek() != '\n') cur.take();
  }
  if (!cur.done()) {
    if (cur.peek() != '\n' && cur.peek() != '\r') {
      fail(cur.line, "unexpected trailing content");
    }
    while (!cur.done() && (cur.peek() == '\n' || cur.peek() == '\r')) cur.take();
  }
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  Cursor cur{text};
  std::string section;
  while (!cur.done()) {
    cur.skip_spaces();
    if (cur.done()) break;
    const char c = cur.peek();
    if (c == '\n' || c == '\r') {
      cur.take();
      continue;
    }
    if (c == '#') {
      while (!cur.done() && cur.peek() != '\n') cur.take();
      continue;
    }
    if (c == '[') {
      cur.take();
      section = parse_key(cur);
      cur.skip_spaces();
      if (cur.done() || cur.peek() != ']') fail(cur.line, "expected ']'");
      cur.take();
      expect_line_end(cur);
      continue;
    }
    const int line = cur.line;
    const std::string key = parse_key(cur);
    cur.skip_spaces();
    if (cur.done() || cur.peek() != '=') fail(cur.line, "expected '='");
    cur.take();
    TomlValue value = parse_value(cur);
    expect_line_end(cur);
    const std::string path = section.empty() ? key : section + "." + key;
    if (table.count(path)) fail(line, "duplicate key '" + path + "'");
    table[path] = std::move(value);
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

void apply_override(TomlTable& table, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value, got '" +
                      assignment + "'");
  }
  std::string key = assignment.substr(0, eq);
  while (!key.empty() && key.back() == ' ') key.pop_back();
  const std::string rhs = assignment.substr(eq + 1);
  Cursor cur{rhs};
  TomlValue value = parse_value(cur);
  cur.skip_spaces();
  if (!cur.done()) {
    throw ConfigError("trailing content in override value '" + rhs + "'");
  }
  table[key] = std::move(value);
}

namespace {

class Resolver {
 public:
  explicit Resolver(const TomlTable& table) : table_(table) {}

  bool has(const std::string& key) {
    consumed_.insert(key);
    return table_.count(key) > 0;
  }

  long long get_int(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = table_.at(key);
    if (const auto* i = std::get_if<long long>(&v.data)) return *i;
    fail(v.line, "key '" + key + "' must be an integer");
  }

  double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = table_.at(key);
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    if (const auto* i = std::get_if<long long>(&v.data)) {
      return static_cast<double>(*i);
    }
    fail(v.line, "key '" + key + "' must be a number");
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = table_.at(key);
    if (const auto* s = std::get_if<std::string>(&v.data)) return *s;
    fail(v.line, "key '" + key + "' must be a string");
  }

  std::vector<long long> get_int_array(const std::string& key,
                                       std::vector<long long> fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = table_.at(key);
    if (!v.is_array()) fail(v.line, "key '" + key + "' must be an array");
    std::vector<long long> out;
    for (const TomlValue& item : std::get<std::vector<TomlValue>>(v.data)) {
      if (const auto* i = std::get_if<long long>(&item.data)) {
        out.push_back(*i);
      } else {
        fail(item.line, "key '" + key + "' must hold integers");
      }
    }
    return out;
  }

  std::vector<std::string> get_string_array(const std::string& key,
                                            std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = table_.at(key);
    if (!v.is_array()) fail(v.line, "key '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const TomlValue& item : std::get<std::vector<TomlValue>>(v.data)) {
      if (const auto* s = std::get_if<std::string>(&item.data)) {
        out.push_back(*s);
      } else {
        fail(item.line, "key '" + key + "' must hold strings");
      }
    }
    return out;
  }

  std::vector<std::vector<int>> get_partition(const std::string& key) {
    std::vector<std::vector<int>> out;
    if (!has(key)) return out;
    const TomlValue& v = table_.at(key);
    if (!v.is_array()) fail(v.line, "key '" + key + "' must be an array");
    for (const TomlValue& group : std::get<std::vector<TomlValue>>(v.data)) {
      if (!group.is_array()) {
        fail(group.line, "key '" + key + "' must hold arrays of integers");
      }
      std::vector<int> ids;
      for (const TomlValue& item : std::get<std::vector<TomlValue>>(group.data)) {
        if (const auto* i = std::get_if<long long>(&item.data)) {
          ids.push_back(static_cast<int>(*i));
        } else {
          fail(item.line, "key '" + key + "' must hold arrays of integers");
        }
      }
      out.push_back(std::move(ids));
    }
    return out;
  }

  void check_consumed() const {
    for (const auto& [key, value] : table_) {
      if (!consumed_.count(key)) {
        throw ConfigError("unknown config key '" + key + "' (line " +
                          std::to_string(value.line) + ")");
      }
    }
  }

 private:
  const TomlTable& table_;
  std::set<std::string> consumed_;
};

}  // namespace

FullConfig resolve_config(const TomlTable& table) {
  Resolver r(table);
  FullConfig cfg;

  cfg.data.generator =
      generator_from_string(r.get_string("data.generator", "gaussian_blobs"));
  cfg.data.classes = static_cast<int>(r.get_int("data.classes", cfg.data.classes));
  cfg.data.input_dim =
      static_cast<int>(r.get_int("data.input_dim", cfg.data.input_dim));
  cfg.data.train_per_class = static_cast<int>(
      r.get_int("data.train_per_class", cfg.data.train_per_class));
  cfg.data.test_per_class = static_cast<int>(
      r.get_int("data.test_per_class", cfg.data.test_per_class));
  cfg.data.separation = r.get_double("data.separation", cfg.data.separation);
  cfg.data.sphere_radius_factor = r.get_double("data.sphere_radius_factor",
                                               cfg.data.sphere_radius_factor);
  cfg.data.mean_subspace_dim = static_cast<int>(
      r.get_int("data.mean_subspace_dim", cfg.data.mean_subspace_dim));
  cfg.data.noise = r.get_double("data.noise", cfg.data.noise);
  cfg.data.tasks = static_cast<int>(r.get_int("data.tasks", cfg.data.tasks));
  cfg.data.classes_per_task = static_cast<int>(
      r.get_int("data.classes_per_task", cfg.data.classes_per_task));
  cfg.data.seed = static_cast<std::uint64_t>(
      r.get_int("data.seed", static_cast<long long>(cfg.data.seed)));
  cfg.data.csv_path = r.get_string("data.csv_path", cfg.data.csv_path);
  cfg.data.label_column =
      r.get_string("data.label_column", cfg.data.label_column);
  cfg.data.task_partition = r.get_partition("data.task_partition");
  cfg.data.train_ratio = r.get_double("data.train_ratio", cfg.data.train_ratio);

  std::vector<long long> hidden_default(cfg.train.hidden.begin(),
                                        cfg.train.hidden.end());
  cfg.train.hidden.clear();
  for (long long w : r.get_int_array("model.hidden", hidden_default)) {
    cfg.train.hidden.push_back(static_cast<int>(w));
  }

  cfg.train.lr = r.get_double("train.lr", cfg.train.lr);
  cfg.train.batch_size =
      static_cast<int>(r.get_int("train.batch_size", cfg.train.batch_size));
  cfg.train.epochs_per_task = static_cast<int>(
      r.get_int("train.epochs_per_task", cfg.train.epochs_per_task));
  cfg.train.buffer_capacity = static_cast<int>(
      r.get_int("train.buffer_capacity", cfg.train.buffer_capacity));

  cfg.methods.clear();
  for (const std::string& name : r.get_string_array(
           "train.methods", {"er", "er_casper", "finetune", "joint"})) {
    cfg.methods.push_back(method_from_string(name));
  }

  cfg.train.casper.rho = r.get_double("casper.rho", cfg.train.casper.rho);
  cfg.train.casper.p =
      static_cast<int>(r.get_int("casper.p", cfg.train.casper.p));
  cfg.train.casper.t =
      static_cast<int>(r.get_int("casper.t", cfg.train.casper.t));
  cfg.train.casper.mc_samples = static_cast<int>(
      r.get_int("casper.mc_samples", cfg.train.casper.mc_samples));
  cfg.train.casper.k =
      static_cast<int>(r.get_int("casper.k", cfg.train.casper.k));

  cfg.analysis.k = static_cast<int>(r.get_int("analysis.k", cfg.analysis.k));
  cfg.analysis.fmap_r =
      static_cast<int>(r.get_int("analysis.fmap_r", cfg.analysis.fmap_r));
  cfg.analysis.fmap_threshold =
      r.get_double("analysis.fmap_threshold", cfg.analysis.fmap_threshold);
  cfg.analysis.probe_points_per_class = static_cast<int>(r.get_int(
      "analysis.probe_points_per_class", cfg.analysis.probe_points_per_class));
  std::vector<long long> ks_default(cfg.analysis.knn_ks.begin(),
                                    cfg.analysis.knn_ks.end());
  cfg.analysis.knn_ks.clear();
  for (long long k : r.get_int_array("analysis.knn_ks", ks_default)) {
    cfg.analysis.knn_ks.push_back(static_cast<int>(k));
  }

  r.check_consumed();

  cfg.data.validate();
  cfg.train.validate();
  return cfg;
}

FullConfig load_config(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides) {
  TomlTable table = parse_toml_file(path);
  for (const std::string& assignment : overrides) {
    apply_override(table, assignment);
  }
  return resolve_config(table);
}

std::string config_to_json(const FullConfig& config, Method method,
                           std::uint64_t seed) {
  nlohmann::json j;
  j["data"] = {{"generator", to_string(config.data.generator)},
               {"classes", config.data.classes},
               {"input_dim", config.data.input_dim},
               {"train_per_class", config.data.train_per_class},
               {"test_per_class", config.data.test_per_class},
               {"separation", config.data.separation},
               {"sphere_radius_factor", config.data.sphere_radius_factor},
               {"mean_subspace_dim", config.data.mean_subspace_dim},
               {"noise", config.data.noise},
               {"tasks", config.data.tasks},
               {"classes_per_task", config.data.classes_per_task},
               {"seed", config.data.seed}};
  if (config.data.generator == Generator::kCsv) {
    j["data"]["csv_path"] = config.data.csv_path;
    j["data"]["label_column"] = config.data.label_column;
    j["data"]["task_partition"] = config.data.task_partition;
    j["data"]["train_ratio"] = config.data.train_ratio;
  }
  j["model"] = {{"hidden", config.train.hidden}};
  j["train"] = {{"lr", config.train.lr},
                {"batch_size", config.train.batch_size},
                {"epochs_per_task", config.train.epochs_per_task},
                {"buffer_capacity", config.train.buffer_capacity}};
  j["casper"] = {{"rho", config.train.casper.rho},
                 {"p", config.train.casper.p},
                 {"t", config.train.casper.t},
                 {"mc_samples", config.train.casper.mc_samples},
                 {"k", config.train.casper.k}};
  j["analysis"] = {
      {"k", config.analysis.k},
      {"fmap_r", config.analysis.fmap_r},
      {"fmap_threshold", config.analysis.fmap_threshold},
      {"probe_points_per_class", config.analysis.probe_points_per_class},
      {"knn_ks", config.analysis.knn_ks}};
  j["method"] = to_string(method);
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  const auto range = spec.find("..");
  try {
    if (range != std::string::npos) {
      const std::uint64_t lo = std::stoull(spec.substr(0, range));
      const std::uint64_t hi = std::stoull(spec.substr(range + 2));
      if (hi < lo) throw ConfigError("seed range is descending: " + spec);
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      std::stringstream ss(spec);
      std::string token;
      while (std::getline(ss, token, ',')) {
        if (!token.empty()) seeds.push_back(std::stoull(token));
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse seed spec '" + spec + "'");
  }
  if (seeds.empty()) throw ConfigError("seed spec '" + spec + "' is empty");
  return seeds;
}

}  // namespace casper
