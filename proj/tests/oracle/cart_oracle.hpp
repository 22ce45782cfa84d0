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

// Brute-force CART for classification, written without any library code.
// Every node re-enumerates every (feature, distinct value) pair, builds the
// two children by direct comparison and recounts their histograms.
// Tie-break: first strict maximum over features ascending, then thresholds
// ascending. Thresholds sit at the float midpoint of consecutive distinct
// values, or at the lower value if the midpoint is not strictly below the
// upper one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace oracle {

struct Data {
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  std::vector<unsigned> w;  // empty: all 1
};

enum class Measure { gini, entropy };

struct Node {
  bool leaf = true;
  std::size_t feature = 0;
  float threshold = 0.0f;
  int label = 0;
  std::unique_ptr<Node> left, right;
};

struct Params {
  Measure measure = Measure::gini;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::optional<unsigned> max_depth;
};

inline std::vector<double> histogram(const Data& data, const std::vector<std::size_t>& rows) {
  std::vector<double> h(data.k, 0.0);
  for (std::size_t r : rows) h[static_cast<std::size_t>(data.y[r])] += data.w.empty() ? 1.0 : data.w[r];
  return h;
}

inline double total(const std::vector<double>& h) {
  double t = 0.0;
  for (double c : h) t += c;
  return t;
}

inline double impurity(const std::vector<double>& h, Measure m) {
  const double t = total(h);
  if (m == Measure::gini) {
    double sq = 0.0;
    for (double c : h) sq += (c / t) * (c / t);
    return std::max(0.0, 1.0 - sq);
  }
  double e = 0.0;
  for (double c : h)
    if (c > 0.0) e -= (c / t) * std::log2(c / t);
  return std::max(0.0, e);
}

inline float midpoint(float a, float b) {
  const auto mid = static_cast<float>((static_cast<double>(a) + static_cast<double>(b)) * 0.5);
  return (mid >= a && mid < b) ? mid : a;
}

inline int majority(const std::vector<double>& h) {
  int best = 0;
  for (std::size_t c = 1; c < h.size(); ++c)
    if (h[c] > h[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

inline std::unique_ptr<Node> grow(const Data& data, const std::vector<std::size_t>& rows, unsigned depth,
                                  const Params& p) {
  auto node = std::make_unique<Node>();
  const auto h = histogram(data, rows);
  node->label = majority(h);
  std::size_t nonzero = 0;
  for (double c : h) nonzero += c > 0.0 ? 1 : 0;
  if (nonzero <= 1 || rows.size() < p.min_samples_split || (p.max_depth && depth >= *p.max_depth)) return node;

  const double parent = impurity(h, p.measure);
  const double w = total(h);
  bool found = false;
  double best_gain = 0.0;
  std::size_t best_f = 0;
  float best_t = 0.0f;
  for (std::size_t f = 0; f < data.d; ++f) {
    std::vector<float> values;
    for (std::size_t r : rows) values.push_back(data.x[r][f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const float t = midpoint(values[i], values[i + 1]);
      std::vector<std::size_t> l, r;
      for (std::size_t row : rows) (data.x[row][f] <= t ? l : r).push_back(row);
      if (l.size() < p.min_samples_leaf || r.size() < p.min_samples_leaf) continue;
      const auto hl = histogram(data, l);
      const auto hr = histogram(data, r);
      const double g = parent - (total(hl) / w) * impurity(hl, p.measure) - (total(hr) / w) * impurity(hr, p.measure);
      if (!found || g > best_gain) {
        found = true;
        best_gain = g;
        best_f = f;
        best_t = t;
      }
    }
  }
  if (!found) return node;
  std::vector<std::size_t> l, r;
  for (std::size_t row : rows) (data.x[row][best_f] <= best_t ? l : r).push_back(row);
  node->leaf = false;
  node->feature = best_f;
  node->threshold = best_t;
  node->left = grow(data, l, depth + 1, p);
  node->right = grow(data, r, depth + 1, p);
  return node;
}

/// Rows with zero weight are left out, as a bootstrap sample would.
inline std::unique_ptr<Node> fit(const Data& data, const Params& p) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < data.y.size(); ++r)
    if (data.w.empty() || data.w[r] > 0) rows.push_back(r);
  return grow(data, rows, 0, p);
}

inline int predict(const Node& root, const std::vector<float>& x) {
  const Node* n = &root;
  while (!n->leaf) n = x[n->feature] <= n->threshold ? n->left.get() : n->right.get();
  return n->label;
}

inline std::size_t count_nodes(const Node& n) {
  return n.leaf ? 1 : 1 + count_nodes(*n.left) + count_nodes(*n.right);
}

}  // namespace oracle
