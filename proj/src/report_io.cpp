#include "casper/report_io.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace casper {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_embedding_csv(const EmbeddingBatch& batch,
                         const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "label";
  for (int c = 0; c < batch.dim(); ++c) out << ",f" << c;
  out << "\n";
  for (int i = 0; i < batch.size(); ++i) {
    out << batch.labels[i];
    for (int c = 0; c < batch.dim(); ++c) {
      out << "," << format_double(batch.features(i, c));
    }
    out << "\n";
  }
}

EmbeddingBatch read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty snapshot csv");
  int dim = 0;  // header: label,f0,...,f{dim-1}
  for (char c : line) {
    if (c == ',') ++dim;
  }
  if (dim < 1) throw InvalidInput("snapshot csv has no feature columns");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    labels.push_back(std::stoi(cell));
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != dim) {
      throw InvalidInput("snapshot row width mismatch in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  EmbeddingBatch batch;
  batch.features = Matrix(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < dim; ++c) {
      batch.features(static_cast<int>(i), c) = rows[i][c];
    }
  }
  batch.labels = std::move(labels);
  return batch;
}

void write_experiment_report(const ExperimentReport& report,
                             const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  fs::create_directories(dir / "buffer_snapshots");
  fs::create_directories(dir / "test_snapshots");

  const int tasks = report.accuracy.tasks();
  {
    std::ofstream out = open_out(dir / "accuracy_matrix.csv");
    out << "task";
    for (int j = 1; j <= tasks; ++j) out << ",after_" << j;
    out << "\n";
    for (int i = 0; i < tasks; ++i) {
      out << (i + 1);
      for (int j = 0; j < tasks; ++j) {
        out << ",";
        if (i <= j) out << format_double(report.accuracy.at(i, j));
      }
      out << "\n";
    }
  }
  {
    std::ofstream out = open_out(dir / "loss_log.csv");
    out << "step,l_stream,l_b,l_casper\n";
    for (const StepLog& step : report.steps) {
      out << step.step << "," << format_double(step.l_stream) << ","
          << format_double(step.l_b) << "," << format_double(step.l_casper)
          << "\n";
    }
  }
  {
    nlohmann::json j;
    j["final_average_accuracy"] = report.final_average_accuracy;
    j["adjusted_forgetting"] =
        report.adjusted_forgetting
            ? nlohmann::json(*report.adjusted_forgetting)
            : nlohmann::json(nullptr);
    nlohmann::json sigmas = nlohmann::json::array();
    for (double s : report.sigma_per_task) {
      sigmas.push_back(std::isfinite(s) ? nlohmann::json(s)
                                        : nlohmann::json(nullptr));
    }
    j["sigma_per_task"] = sigmas;
    j["intra_class_variance"] = report.intra_class_variance;
    nlohmann::json knn = nlohmann::json::object();
    for (const auto& [k, acc] : report.knn_accuracy) {
      knn[std::to_string(k)] = acc;
    }
    j["knn_accuracy"] = knn;
    j["probe_tasks"] = report.probe_tasks;
    std::ofstream out = open_out(dir / "metrics.json");
    out << j.dump(2) << "\n";
  }
  for (std::size_t i = 0; i < report.buffer_snapshots.size(); ++i) {
    write_embedding_csv(report.buffer_snapshots[i],
                        dir / "buffer_snapshots" /
                            ("task_" + std::to_string(i + 1) + ".csv"));
  }
  for (std::size_t i = 0; i < report.probe_snapshots.size(); ++i) {
    write_embedding_csv(report.probe_snapshots[i],
                        dir / "test_snapshots" /
                            ("task_" + std::to_string(i + 1) + ".csv"));
  }
  save_checkpoint(report.final_model, dir / "model.json");
}

void write_summary_csv(const std::vector<SummaryRow>& rows,
                       const std::vector<int>& knn_ks,
                       const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "method,seed,final_average_accuracy,adjusted_forgetting,final_sigma";
  for (int k : knn_ks) out << ",knn_" << k;
  out << ",intra_class_variance\n";
  for (const SummaryRow& row : rows) {
    out << row.method << "," << row.seed << ","
        << format_double(row.final_average_accuracy) << ",";
    if (row.adjusted_forgetting) out << format_double(*row.adjusted_forgetting);
    out << "," << format_double(row.final_sigma);
    for (int k : knn_ks) {
      out << ",";
      const auto it = row.knn_accuracy.find(k);
      if (it != row.knn_accuracy.end()) out << format_double(it->second);
    }
    out << "," << format_double(row.intra_class_variance) << "\n";
  }
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty summary csv");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < header.size()) cells.push_back("");
    SummaryRow row;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& name = header[c];
      const std::string& value = cells[c];
      if (name == "method") row.method = value;
      else if (name == "seed") row.seed = std::stoull(value);
      else if (name == "final_average_accuracy") row.final_average_accuracy = std::stod(value);
      else if (name == "adjusted_forgetting") {
        if (!value.empty()) row.adjusted_forgetting = std::stod(value);
      } else if (name == "final_sigma") row.final_sigma = std::stod(value);
      else if (name == "intra_class_variance") row.intra_class_variance = std::stod(value);
      else if (name.rfind("knn_", 0) == 0 && !value.empty()) {
        row.knn_accuracy[std::stoi(name.substr(4))] = std::stod(value);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace casper
