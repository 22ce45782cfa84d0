// Copyright 2026 The Canopy Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Out-of-core forest construction.
//
// A forest is a list of units. Each unit has one top tree whose leaves
// partition the input space, and n_b bottom trees per top-tree leaf. The
// woody scheme builds it in three phases:
//
//   1. one streaming pass draws n_top random subsets of size R, and a top
//      tree is grown on each with the balance-regularized gain;
//   2. a second streaming pass routes every row through every top tree and
//      appends it, with n_b Poisson(1) bootstrap multiplicities, to its
//      leaf bucket in the scratch store;
//   3. n_b fully-grown bottom trees are built per bucket.
//
// The `subsets` and `standard` baselines produce the same model shape with a
// single-leaf top tree per member tree.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "canopy/data.hpp"
#include "canopy/store.hpp"
#include "canopy/tree.hpp"

namespace canopy {

enum class Scheme { woody, subsets, standard };

Scheme parse_scheme(const std::string& name);
const char* to_string(Scheme scheme);

enum class Combiner { vote, mean };

struct ForestConfig {
  std::uint32_t n_top = 1;
  std::uint32_t n_b = 1;
  /// R; default min(500000, n, max(100 sqrt(n), 100000)).
  std::optional<std::uint64_t> subset_size;
  /// M; same default as R.
  std::optional<std::uint64_t> leaf_bucket_size;
  double lambda = 1.0;
  Impurity top_measure = Impurity::gini;
  StoreKind store = StoreKind::memory;
  std::filesystem::path scratch_dir;
  std::uint64_t seed = 0;
  int jobs = 4;
  /// Bottom-tree parameters. features_per_node unset means sqrt(d).
  BuildParams bottom;
  bool bootstrap = true;
  /// Buckets larger than multiplier * M are re-split before phase 3.
  double hard_cap_multiplier = 8.0;
  std::size_t write_buffer_rows = 1024;
  bool keep_scratch = false;
  /// Subset size of the `subsets` baseline.
  std::uint64_t baseline_subset_size = 500000;

  std::uint32_t total_trees() const noexcept { return n_top * n_b; }
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// min(500000, n, max(100 sqrt(n), 100000)), used for both R and M.
std::uint64_t default_subset_and_leaf_size(std::uint64_t n);

/// sqrt(d) rounded down, at least 1.
std::uint32_t sqrt_features(std::uint32_t d);

struct TopUnit {
  TreeModel top;
  /// bottoms[leaf][b] is bottom tree b of top-tree leaf `leaf`.
  std::vector<std::vector<TreeModel>> bottoms;
};

struct ForestModel {
  Task task;
  std::uint32_t n_features = 0;
  Combiner combiner = Combiner::vote;
  std::vector<TopUnit> units;
  /// Model-affecting configuration, echoed into the saved manifest.
  std::vector<std::pair<std::string, std::string>> config_echo;

  std::size_t total_trees() const;
  /// Checks the unit invariants (bucket coverage, n_b per leaf, d and task).
  void validate() const;
};

struct BucketRecord {
  BucketId id;
  std::uint64_t rows = 0;
  std::string location;
};

struct BucketManifest {
  std::vector<BucketRecord> buckets;
  std::uint64_t rows_for(std::uint32_t top_tree) const;
  std::uint64_t max_rows() const;
};

/// Phase timings and memory high-water marks of one training run.
struct TrainingReport {
  double sample_top_seconds = 0.0;
  double distribute_seconds = 0.0;
  double bottom_seconds = 0.0;
  double total_seconds = 0.0;
  std::int64_t peak_resident_phase12 = 0;
  std::int64_t peak_resident_phase3 = 0;
  std::uint64_t subset_size = 0;       ///< R actually used
  std::uint64_t leaf_bucket_size = 0;  ///< M actually used
  std::uint64_t chunk_size = 0;
  std::uint64_t write_buffer_budget = 0;  ///< rows, summed over bucket writers
  std::uint64_t max_bucket_rows = 0;
  std::size_t n_buckets = 0;
  std::size_t n_resplits = 0;
};

/// Streams `dataset` once, routing every row through each top tree and
/// appending it with n_b bootstrap multiplicities (all 1 if `bootstrap` is
/// false) to bucket (t, leaf). On storage failure the error message lists
/// the buckets completed so far.
BucketManifest distribute(std::span<const TreeModel> top_trees, const DatasetHandle& dataset, ScratchStore& store,
                          std::uint32_t n_b, std::uint64_t seed, bool bootstrap = true, int jobs = 1,
                          ResidentCounter* counter = nullptr);

ForestModel build_big_forest(const DatasetHandle& dataset, const ForestConfig& config,
                             TrainingReport* report = nullptr);

/// Baseline: total_trees subsets of min(baseline_subset_size, n) rows drawn
/// in one pass, one standard tree per subset, remaining rows unused.
ForestModel build_subsets_forest(const DatasetHandle& dataset, const ForestConfig& config,
                                 TrainingReport* report = nullptr);

/// Reference in-memory random forest: total_trees trees on bootstrap
/// samples of the whole dataset.
ForestModel build_standard_forest(const DatasetHandle& dataset, const ForestConfig& config,
                                  TrainingReport* report = nullptr);

ForestModel train_forest(Scheme scheme, const DatasetHandle& dataset, const ForestConfig& config,
                         TrainingReport* report = nullptr);

/// Class with the most votes; ties go to the lowest class index.
std::uint32_t vote_argmax(std::span<const std::uint64_t> votes);

/// Combined prediction for every row of `patterns`.
std::vector<double> predict_forest(const ForestModel& model, const Block& patterns, int jobs = 1);
std::vector<double> predict_forest_serial(const ForestModel& model, const Block& patterns);
double predict_forest(const ForestModel& model, std::span<const float> pattern);

/// Streams `dataset` and predicts every row chunk by chunk.
std::vector<double> predict_dataset(const ForestModel& model, const DatasetHandle& dataset, int jobs = 1);

// Forest container file: a text manifest of `key value` lines ending with
// a line `end`, followed by the tree blobs listed in the manifest.
std::vector<char> serialize_forest(const ForestModel& model);
ForestModel deserialize_forest(std::span<const char> bytes);
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace canopy
