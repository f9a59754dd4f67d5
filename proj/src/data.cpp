#include "casper/data.hpp"

#include "casper/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace casper {

std::vector<int> TaskStream::all_labels() const {
  std::set<int> labels;
  for (const Task& task : tasks) {
    labels.insert(task.labels.begin(), task.labels.end());
  }
  return {labels.begin(), labels.end()};
}

void validate_stream(const TaskStream& stream) {
  if (stream.tasks.empty()) throw InvalidInput("stream has no tasks");
  std::set<int> seen;
  for (const Task& task : stream.tasks) {
    if (task.size() < 1) throw InvalidInput("stream contains an empty task");
    if (static_cast<int>(task.labels.size()) != task.size()) {
      throw InvalidInput("task label count mismatch");
    }
    std::set<int> here(task.labels.begin(), task.labels.end());
    for (int label : here) {
      if (label < 0) throw InvalidInput("labels must be non-negative");
      if (seen.count(label)) {
        throw InvalidInput("task label sets are not disjoint");
      }
    }
    seen.insert(here.begin(), here.end());
  }
}

Generator generator_from_string(const std::string& name) {
  if (name == "gaussian_blobs") return Generator::kGaussianBlobs;
  if (name == "concentric_rings") return Generator::kConcentricRings;
  if (name == "csv") return Generator::kCsv;
  throw ConfigError("unknown generator: " + name);
}

std::string to_string(Generator g) {
  switch (g) {
    case Generator::kGaussianBlobs: return "gaussian_blobs";
    case Generator::kConcentricRings: return "concentric_rings";
    case Generator::kCsv: return "csv";
  }
  return "unknown";
}

void DatasetConfig::validate() const {
  if (generator == Generator::kCsv) {
    if (csv_path.empty()) throw ConfigError("csv generator needs a csv_path");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
      throw ConfigError("train_ratio must lie in (0, 1)");
    }
    return;
  }
  if (classes < 1 || input_dim < 1 || train_per_class < 1 ||
      test_per_class < 1 || tasks < 1 || classes_per_task < 1) {
    throw ConfigError("dataset sizes must be positive");
  }
  if (classes != tasks * classes_per_task) {
    throw ConfigError("classes must equal tasks * classes_per_task");
  }
  if (!(separation > 0.0)) throw ConfigError("separation must be > 0");
  if (!(sphere_radius_factor >= 0.5)) {
    throw ConfigError("sphere_radius_factor must be >= 0.5");
  }
  if (mean_subspace_dim < 0) {
    throw ConfigError("mean_subspace_dim must be >= 0");
  }
  if (noise < 0.0) throw ConfigError("noise must be >= 0");
}

namespace {

// Class means on the sphere of radius `separation`, rejection-sampled until
// all pairwise distances reach `separation`. Bounded attempts; dense
// packings fail loudly rather than spinning.
std::vector<Vector> sample_means(int classes, int dim, double separation,
                                 double radius, int subspace_dim, Rng& rng) {
  constexpr int kMaxAttempts = 100000;

  // Optional random orthonormal basis spanning the mean subspace.
  Matrix basis;
  const int draw_dim =
      subspace_dim > 0 ? std::min(subspace_dim, dim) : dim;
  if (draw_dim < dim) {
    Matrix gaussian(dim, draw_dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < draw_dim; ++j) gaussian(i, j) = rng.next_gaussian();
    }
    basis = Eigen::HouseholderQR<Matrix>(gaussian)
                .householderQ() *
            Matrix::Identity(dim, draw_dim);
  }

  std::vector<Vector> means;
  int attempts = 0;
  while (static_cast<int>(means.size()) < classes) {
    if (++attempts > kMaxAttempts) {
      throw std::runtime_error(
          "could not place class means at the requested separation");
    }
    Vector coords(draw_dim);
    for (int i = 0; i < draw_dim; ++i) coords(i) = rng.next_gaussian();
    Vector candidate = draw_dim < dim ? Vector(basis * coords) : coords;
    const double norm = candidate.norm();
    if (norm < 1e-12) continue;
    candidate *= radius / norm;
    bool ok = true;
    for (const Vector& mean : means) {
      if ((candidate - mean).norm() < separation) {
        ok = false;
        break;
      }
    }
    if (ok) means.push_back(std::move(candidate));
  }
  return means;
}

Task make_task(const std::vector<Matrix>& class_points,
               const std::vector<int>& class_ids) {
  int total = 0;
  for (const Matrix& pts : class_points) total += static_cast<int>(pts.rows());
  Task task;
  task.inputs = Matrix(total, class_points.front().cols());
  task.labels.resize(total);
  int row = 0;
  for (std::size_t c = 0; c < class_points.size(); ++c) {
    for (int i = 0; i < class_points[c].rows(); ++i) {
      task.inputs.row(row) = class_points[c].row(i);
      task.labels[row] = class_ids[c];
      ++row;
    }
  }
  return task;
}

}  // namespace

SplitStreams generate(const DatasetConfig& cfg) {
  cfg.validate();
  if (cfg.generator == Generator::kCsv) {
    return load_csv(cfg.csv_path, cfg.label_column, cfg.task_partition,
                    cfg.train_ratio, cfg.seed);
  }

  Rng rng(derive_seed(cfg.seed, RngStream::kDataset));

  std::vector<Vector> means;
  if (cfg.generator == Generator::kGaussianBlobs) {
    means = sample_means(cfg.classes, cfg.input_dim, cfg.separation,
                         cfg.sphere_radius_factor * cfg.separation,
                         cfg.mean_subspace_dim, rng);
  }

  // Per class, draw train then test points from the same distribution;
  // the draws are distinct samples, so the splits are disjoint.
  std::vector<Matrix> train_points(cfg.classes), test_points(cfg.classes);
  for (int c = 0; c < cfg.classes; ++c) {
    const int rows = cfg.train_per_class + cfg.test_per_class;
    Matrix pts(rows, cfg.input_dim);
    for (int i = 0; i < rows; ++i) {
      if (cfg.generator == Generator::kGaussianBlobs) {
        for (int jj = 0; jj < cfg.input_dim; ++jj) {
          pts(i, jj) = means[c](jj) + cfg.noise * rng.next_gaussian();
        }
      } else {
        // Ring of radius (c + 1) * separation in the first two coordinates,
        // isotropic noise everywhere.
        const double radius = (c + 1) * cfg.separation;
        const double angle = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        pts.row(i).setZero();
        pts(i, 0) = radius * std::cos(angle);
        if (cfg.input_dim > 1) pts(i, 1) = radius * std::sin(angle);
        for (int jj = 0; jj < cfg.input_dim; ++jj) {
          pts(i, jj) += cfg.noise * rng.next_gaussian();
        }
      }
    }
    train_points[c] = pts.topRows(cfg.train_per_class);
    test_points[c] = pts.bottomRows(cfg.test_per_class);
  }

  SplitStreams out;
  for (int t = 0; t < cfg.tasks; ++t) {
    std::vector<Matrix> train_classes, test_classes;
    std::vector<int> ids;
    for (int c = t * cfg.classes_per_task; c < (t + 1) * cfg.classes_per_task;
         ++c) {
      train_classes.push_back(train_points[c]);
      test_classes.push_back(test_points[c]);
      ids.push_back(c);
    }
    out.train.tasks.push_back(make_task(train_classes, ids));
    out.test.tasks.push_back(make_task(test_classes, ids));
  }
  validate_stream(out.train);
  validate_stream(out.test);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

SplitStreams load_csv(const std::filesystem::path& path,
                      const std::string& label_column,
                      const std::vector<std::vector<int>>& task_partition,
                      double train_ratio, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  int label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = static_cast<int>(i);
  }
  if (label_idx < 0) {
    throw InvalidInput("csv has no column named '" + label_column + "'");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  if (dim < 1) throw InvalidInput("csv has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int row_number = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InvalidInput("csv row " + std::to_string(row_number) +
                         " has the wrong cell count");
    }
    std::vector<double> features;
    features.reserve(dim);
    int label = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double value;
      try {
        std::size_t used = 0;
        value = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InvalidInput("csv row " + std::to_string(row_number) +
                           ": cell '" + cells[c] + "' is not numeric");
      }
      if (!std::isfinite(value)) {
        throw InvalidInput("csv row " + std::to_string(row_number) +
                           " contains a non-finite value");
      }
      if (static_cast<int>(c) == label_idx) {
        label = static_cast<int>(std::llround(value));
        if (std::abs(value - label) > 1e-9 || label < 0) {
          throw InvalidInput("csv row " + std::to_string(row_number) +
                             ": label is not a non-negative integer");
        }
      } else {
        features.push_back(value);
      }
    }
    rows.push_back(std::move(features));
    labels.push_back(label);
  }
  if (rows.empty()) throw InvalidInput("csv has no data rows");

  // Partition sanity: disjoint groups covering only present labels.
  if (task_partition.empty()) throw InvalidInput("task partition is empty");
  std::set<int> partitioned;
  for (const auto& group : task_partition) {
    if (group.empty()) throw InvalidInput("task partition has an empty group");
    for (int cls : group) {
      if (partitioned.count(cls)) {
        throw InvalidInput("task partition label sets are not disjoint");
      }
      partitioned.insert(cls);
    }
  }

  // Stratified split, per class, seeded.
  Rng rng(derive_seed(seed, RngStream::kDataset));
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  std::set<int> train_set;
  for (auto& [cls, idx] : by_class) {
    rng.shuffle(idx);
    const int n_train = std::max(
        1, static_cast<int>(std::floor(train_ratio * idx.size())));
    if (n_train >= static_cast<int>(idx.size())) {
      throw InvalidInput("class " + std::to_string(cls) +
                         " is too small for the train/test split");
    }
    for (int i = 0; i < n_train; ++i) train_set.insert(idx[i]);
  }

  // Standardize with the train statistics.
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(dim);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(dim);
  for (int i : train_set) {
    for (int c = 0; c < dim; ++c) {
      mean(c) += rows[i][c];
      sq(c) += rows[i][c] * rows[i][c];
    }
  }
  mean /= static_cast<double>(train_set.size());
  Eigen::RowVectorXd stddev(dim);
  for (int c = 0; c < dim; ++c) {
    const double var = sq(c) / train_set.size() - mean(c) * mean(c);
    stddev(c) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  SplitStreams out;
  for (const auto& group : task_partition) {
    Task train_task, test_task;
    std::vector<std::vector<double>> train_rows, test_rows;
    std::vector<int> train_labels, test_labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (std::find(group.begin(), group.end(), labels[i]) == group.end()) {
        continue;
      }
      if (train_set.count(static_cast<int>(i))) {
        train_rows.push_back(rows[i]);
        train_labels.push_back(labels[i]);
      } else {
        test_rows.push_back(rows[i]);
        test_labels.push_back(labels[i]);
      }
    }
    if (train_rows.empty() || test_rows.empty()) {
      throw InvalidInput("a task in the partition has no train or test rows");
    }
    auto fill = [&](Task& task, const std::vector<std::vector<double>>& src,
                    std::vector<int> lbl) {
      task.inputs = Matrix(src.size(), dim);
      for (std::size_t i = 0; i < src.size(); ++i) {
        for (int c = 0; c < dim; ++c) {
          task.inputs(static_cast<int>(i), c) = (src[i][c] - mean(c)) / stddev(c);
        }
      }
      task.labels = std::move(lbl);
    };
    fill(train_task, train_rows, std::move(train_labels));
    fill(test_task, test_rows, std::move(test_labels));
    out.train.tasks.push_back(std::move(train_task));
    out.test.tasks.push_back(std::move(test_task));
  }
  validate_stream(out.train);
  validate_stream(out.test);
  return out;
}

}  // namespace casper
