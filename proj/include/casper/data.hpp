#pragma once

#include "casper/stream.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace casper {

enum class Generator { kGaussianBlobs, kConcentricRings, kCsv };

Generator generator_from_string(const std::string& name);
std::string to_string(Generator g);

struct DatasetConfig {
  Generator generator = Generator::kGaussianBlobs;
  int classes = 10;
  int input_dim = 16;
  int train_per_class = 100;
  int test_per_class = 100;
  double separation = 6.0;  // minimum distance between class means
  double noise = 1.0;       // isotropic noise scale
  // Sphere radius as a multiple of `separation`.
  double sphere_radius_factor = 1.0;
  // When positive, class means are drawn from a random subspace of this
  // dimension (intersected with the sphere). Crowding 10 means into a few
  // directions makes tasks share extractor units, which is what produces
  // measurable interference; 0 uses the full ambient space.
  int mean_subspace_dim = 0;
  int tasks = 5;
  int classes_per_task = 2;
  std::uint64_t seed = 1;

  // csv generator only
  std::string csv_path;
  std::string label_column = "label";
  std::vector<std::vector<int>> task_partition;
  double train_ratio = 0.8;

  void validate() const;
};

struct SplitStreams {
  TaskStream train;
  TaskStream test;
};

/// Synthesizes a class-incremental benchmark: gaussian_blobs places class
/// means on a sphere with pairwise distance >= separation and adds isotropic
/// noise; concentric_rings places classes on rings of growing radius.
/// Classes are partitioned into tasks in ascending id order. Deterministic
/// per seed.
SplitStreams generate(const DatasetConfig& cfg);

/// Loads a labelled CSV (header row, integer-codable label column, numeric
/// feature columns), splits stratified train/test at `train_ratio`, and
/// standardizes every feature column with the train statistics. Tasks follow
/// `task_partition`, which must cover disjoint label groups.
SplitStreams load_csv(const std::filesystem::path& path,
                      const std::string& label_column,
                      const std::vector<std::vector<int>>& task_partition,
                      double train_ratio, std::uint64_t seed);

}  // namespace casper
