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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopy/data.hpp"
#include "canopy/random.hpp"

namespace canopy {

enum class Impurity { gini, entropy, variance };

Impurity parse_impurity(const std::string& name);
const char* to_string(Impurity measure);

/// Weighted label statistics of a set of rows: a class histogram for
/// classification, or (weight, sum, sum of squares) for regression.
struct LabelSummary {
  std::vector<double> counts;  ///< per-class weight; empty for regression
  double weight = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  static LabelSummary for_task(const Task& task);
  static LabelSummary histogram(std::vector<double> counts);
  static LabelSummary from_labels(std::span<const double> labels);

  bool is_classification() const noexcept { return !counts.empty(); }
  double total() const noexcept { return weight; }

  void add(double label, double w) {
    weight += w;
    if (!counts.empty()) {
      counts[static_cast<std::size_t>(label)] += w;
    } else {
      sum += w * label;
      sum_sq += w * label * label;
    }
  }
  /// this = whole - part (component-wise).
  void assign_difference(const LabelSummary& whole, const LabelSummary& part);
};

/// gini: 1 - sum p^2; entropy: -sum p log2 p; variance: weighted population
/// variance. Throws DomainError on an empty summary or a measure that does
/// not fit the summary's task.
double impurity(Impurity measure, const LabelSummary& s);

/// Information gain Q(S) - |L|/|S| Q(L) - |R|/|S| Q(R).
double gain(const LabelSummary& S, const LabelSummary& L, const LabelSummary& R, Impurity measure);

/// Balance-regularized gain (1 - lambda) G - lambda | |L| - |R| | / |S|.
double adapted_gain(const LabelSummary& S, const LabelSummary& L, const LabelSummary& R, Impurity measure,
                    double lambda);

struct GainConfig {
  double lambda = 0.0;
  Impurity measure = Impurity::gini;
  /// Features drawn per node; std::nullopt evaluates every feature.
  std::optional<std::uint32_t> features_per_node;
  /// Minimum number of rows on either side of a split.
  std::size_t min_samples_leaf = 1;

  void validate(std::uint32_t n_features) const;
};

struct SplitCandidate {
  std::uint32_t feature = 0;
  float threshold = 0.0f;
  double left_weight = 0.0;  ///< |L|, weighted
  double right_weight = 0.0;
  std::size_t left_rows = 0;  ///< distinct rows going left
  std::size_t right_rows = 0;
  double gain = 0.0;
};

/// Per-node set of features known to be constant over the node's rows.
using ConstantMask = std::vector<bool>;

/// Threshold strictly separating a < b, placed at their midpoint when the
/// midpoint is representable between them, otherwise at a.
float split_threshold(float a, float b) noexcept;

/// Searches the best (feature, threshold) for the rows `node` of `rows`.
///
/// `weights` holds one multiplicity per row of `rows` (empty means all 1);
/// `node` must only reference rows with positive weight. Thresholds are
/// tried between consecutive distinct values; ties on gain go to the lowest
/// feature index, then the lowest threshold. Features found constant are
/// recorded in `constant` (if given) and skipped on later calls.
std::optional<SplitCandidate> best_split(const Block& rows, std::span<const std::size_t> node,
                                         std::span<const std::uint32_t> weights, const GainConfig& config,
                                         const Task& task, Rng& rng, ConstantMask* constant = nullptr);

/// Weighted label summary of `node`.
LabelSummary summarize(const Block& rows, std::span<const std::size_t> node, std::span<const std::uint32_t> weights,
                       const Task& task);

}  // namespace canopy
