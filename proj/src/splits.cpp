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

#include "canopy/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "canopy/error.hpp"

namespace canopy {

Impurity parse_impurity(const std::string& name) {
  if (name == "gini") return Impurity::gini;
  if (name == "entropy") return Impurity::entropy;
  if (name == "variance" || name == "mse") return Impurity::variance;
  throw ConfigError("unknown impurity measure '" + name + "'");
}

const char* to_string(Impurity measure) {
  switch (measure) {
    case Impurity::gini: return "gini";
    case Impurity::entropy: return "entropy";
    case Impurity::variance: return "variance";
  }
  return "?";
}

LabelSummary LabelSummary::for_task(const Task& task) {
  LabelSummary s;
  if (task.is_classification()) s.counts.assign(task.n_classes, 0.0);
  return s;
}

LabelSummary LabelSummary::histogram(std::vector<double> counts) {
  LabelSummary s;
  s.weight = std::accumulate(counts.begin(), counts.end(), 0.0);
  s.counts = std::move(counts);
  return s;
}

LabelSummary LabelSummary::from_labels(std::span<const double> labels) {
  LabelSummary s;
  for (double y : labels) s.add(y, 1.0);
  return s;
}

void LabelSummary::assign_difference(const LabelSummary& whole, const LabelSummary& part) {
  weight = whole.weight - part.weight;
  counts.resize(whole.counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) counts[c] = whole.counts[c] - part.counts[c];
  sum = whole.sum - part.sum;
  sum_sq = whole.sum_sq - part.sum_sq;
}

double impurity(Impurity measure, const LabelSummary& s) {
  if (!(s.weight > 0.0)) throw DomainError("impurity of an empty label summary");
  switch (measure) {
    case Impurity::gini: {
      if (!s.is_classification()) throw DomainError("gini needs a class histogram");
      double sq = 0.0;
      for (double c : s.counts) {
        const double p = c / s.weight;
        sq += p * p;
      }
      return std::max(0.0, 1.0 - sq);
    }
    case Impurity::entropy: {
      if (!s.is_classification()) throw DomainError("entropy needs a class histogram");
      double h = 0.0;
      for (double c : s.counts) {
        if (c <= 0.0) continue;
        const double p = c / s.weight;
        h -= p * std::log2(p);
      }
      return std::max(0.0, h);
    }
    case Impurity::variance: {
      if (s.is_classification()) throw DomainError("variance needs regression statistics");
      const double mean = s.sum / s.weight;
      return std::max(0.0, s.sum_sq / s.weight - mean * mean);
    }
  }
  return 0.0;
}

namespace {

double gain_given_parent(double parent_impurity, double parent_weight, const LabelSummary& L, const LabelSummary& R,
                         Impurity measure) {
  return parent_impurity - (L.weight / parent_weight) * impurity(measure, L) -
         (R.weight / parent_weight) * impurity(measure, R);
}

double blend(double g, double left_weight, double right_weight, double parent_weight, double lambda) {
  return (1.0 - lambda) * g - lambda * std::abs(left_weight - right_weight) / parent_weight;
}

void check_sides(const LabelSummary& S, const LabelSummary& L, const LabelSummary& R) {
  if (!(L.weight > 0.0) || !(R.weight > 0.0)) throw DomainError("split with an empty side");
  if (std::abs(L.weight + R.weight - S.weight) > 1e-9 * std::max(1.0, S.weight))
    throw DomainError("split sides do not add up to the parent set");
}

}  // namespace

double gain(const LabelSummary& S, const LabelSummary& L, const LabelSummary& R, Impurity measure) {
  check_sides(S, L, R);
  return gain_given_parent(impurity(measure, S), S.weight, L, R, measure);
}

double adapted_gain(const LabelSummary& S, const LabelSummary& L, const LabelSummary& R, Impurity measure,
                    double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  return blend(gain(S, L, R, measure), L.weight, R.weight, S.weight, lambda);
}

void GainConfig::validate(std::uint32_t n_features) const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (features_per_node && (*features_per_node == 0 || *features_per_node > n_features))
    throw ConfigError("features per node must lie in [1, d]");
  if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be at least 1");
}

float split_threshold(float a, float b) noexcept {
  const auto mid = static_cast<float>((static_cast<double>(a) + static_cast<double>(b)) * 0.5);
  return (mid >= a && mid < b) ? mid : a;
}

LabelSummary summarize(const Block& rows, std::span<const std::size_t> node, std::span<const std::uint32_t> weights,
                       const Task& task) {
  LabelSummary s = LabelSummary::for_task(task);
  for (std::size_t r : node) s.add(rows.y[r], weights.empty() ? 1.0 : static_cast<double>(weights[r]));
  return s;
}

std::optional<SplitCandidate> best_split(const Block& rows, std::span<const std::size_t> node,
                                         std::span<const std::uint32_t> weights, const GainConfig& config,
                                         const Task& task, Rng& rng, ConstantMask* constant) {
  const std::uint32_t d = rows.n_features;
  config.validate(d);
  if (node.size() < 2) return std::nullopt;

  std::vector<std::uint32_t> features(d);
  std::iota(features.begin(), features.end(), 0u);
  if (config.features_per_node && *config.features_per_node < d) {
    const std::uint32_t f = *config.features_per_node;
    for (std::uint32_t i = 0; i < f; ++i) {
      const auto j = i + static_cast<std::uint32_t>(uniform_below(rng, d - i));
      std::swap(features[i], features[j]);
    }
    features.resize(f);
    std::sort(features.begin(), features.end());
  }

  const LabelSummary parent = summarize(rows, node, weights, task);
  const double parent_impurity = impurity(config.measure, parent);
  const double lambda = config.lambda;
  const std::size_t m = node.size();

  std::optional<SplitCandidate> best;
  std::vector<std::pair<float, std::size_t>> sorted(m);
  LabelSummary left = LabelSummary::for_task(task);
  LabelSummary right = LabelSummary::for_task(task);

  for (std::uint32_t f : features) {
    if (constant != nullptr && (*constant)[f]) continue;
    for (std::size_t i = 0; i < m; ++i) sorted[i] = {rows.at(node[i], f), node[i]};
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front().first == sorted.back().first) {
      if (constant != nullptr) (*constant)[f] = true;
      continue;
    }
    left = LabelSummary::for_task(task);
    for (std::size_t j = 0; j + 1 < m; ++j) {
      const std::size_t r = sorted[j].second;
      left.add(rows.y[r], weights.empty() ? 1.0 : static_cast<double>(weights[r]));
      const float a = sorted[j].first;
      const float b = sorted[j + 1].first;
      if (a == b) continue;
      const std::size_t left_rows = j + 1;
      if (left_rows < config.min_samples_leaf || m - left_rows < config.min_samples_leaf) continue;
      right.assign_difference(parent, left);
      const double g = blend(gain_given_parent(parent_impurity, parent.weight, left, right, config.measure),
                             left.weight, right.weight, parent.weight, lambda);
      if (!best || g > best->gain) {
        best = SplitCandidate{f, split_threshold(a, b), left.weight, right.weight, left_rows, m - left_rows, g};
      }
    }
  }
  return best;
}

}  // namespace canopy
