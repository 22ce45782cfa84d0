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
#include <vector>

#include "canopy/data.hpp"
#include "canopy/random.hpp"
#include "canopy/splits.hpp"

namespace canopy {

enum class TreeMode : std::uint8_t {
  standard = 0,  ///< leaves carry label statistics
  top = 1,       ///< leaves carry bucket indices
};

struct TreeNode {
  bool leaf = true;
  std::int32_t feature = -1;
  float threshold = 0.0f;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  // Leaf payload. Classification leaves index `histograms` by `payload`.
  std::uint32_t payload = 0;
  std::uint64_t bucket = 0;
  double mean = 0.0;
  std::uint64_t count = 0;
  double label = 0.0;  ///< cached prediction (argmax class or mean)
};

/// Array-encoded binary tree; the root is node 0. Immutable once built.
class TreeModel {
 public:
  TreeMode mode() const noexcept { return mode_; }
  const Task& task() const noexcept { return task_; }
  std::uint32_t n_features() const noexcept { return n_features_; }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::size_t n_leaves() const noexcept { return n_leaves_; }
  std::uint32_t depth() const noexcept { return depth_; }

  /// Weighted class histogram of a classification leaf.
  std::span<const std::uint64_t> histogram(const TreeNode& leaf) const noexcept {
    return {histograms_.data() + std::size_t{leaf.payload} * task_.n_classes, task_.n_classes};
  }

  /// Index of the leaf reached by `pattern` (x_i <= threshold goes left).
  std::uint32_t find_leaf(std::span<const float> pattern) const;
  /// Unchecked variant for hot loops; `pattern` must have n_features values.
  std::uint32_t find_leaf_unchecked(const float* pattern) const noexcept {
    std::uint32_t i = 0;
    while (!nodes_[i].leaf) {
      const TreeNode& n = nodes_[i];
      i = pattern[n.feature] <= n.threshold ? n.left : n.right;
    }
    return i;
  }

  bool operator==(const TreeModel&) const;

 private:
  friend class TreeAssembler;
  friend TreeModel deserialize_tree(std::span<const char> bytes);
  void finalize();

  TreeMode mode_ = TreeMode::standard;
  Task task_;
  std::uint32_t n_features_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<std::uint64_t> histograms_;
  std::size_t n_leaves_ = 0;
  std::uint32_t depth_ = 0;
};

struct BuildParams {
  GainConfig gain;
  std::size_t min_samples_split = 2;
  std::optional<std::uint32_t> max_depth;  ///< none: fully grown
  TreeMode mode = TreeMode::standard;
  /// Top-tree mode: a node with fewer rows than this becomes a leaf.
  double leaf_threshold = 2.0;
  /// Top-tree mode: also stop at label-pure nodes (plain CART behavior;
  /// used as the unbalanced reference).
  bool stop_when_pure = false;

  static BuildParams top_tree(double leaf_threshold, double lambda, Impurity measure = Impurity::gini);
  void validate(std::uint32_t n_features) const;
};

/// Fully-grown CART tree over all rows of `rows` with bootstrap
/// multiplicities `weights` (empty: all 1). Zero-weight rows are ignored.
TreeModel build_tree(const Block& rows, std::span<const std::uint32_t> weights, const Task& task,
                     const BuildParams& params, Rng& rng);

/// Top tree over a random subset: explicit-stack construction that keeps
/// splitting (pure nodes included) until a node holds fewer than
/// params.leaf_threshold rows; splits maximize the adapted gain over all
/// features. Leaves are numbered 0..N-1 in stack pop order. If
/// `assignment` is given it receives the leaf index of every subset row.
TreeModel build_top_tree(const Block& subset, const Task& task, const BuildParams& params, Rng& rng,
                         std::vector<std::uint64_t>* assignment = nullptr);

/// max(2, M * R / n).
double estimate_leaf_threshold(double M, std::uint64_t R, std::uint64_t n);

/// Class index (argmax of the leaf histogram, lowest index on ties) or mean.
double predict(const TreeModel& tree, std::span<const float> pattern);
/// Bucket index of the leaf reached by `pattern` in a top tree.
std::uint64_t predict_leaf_index(const TreeModel& tree, std::span<const float> pattern);

/// Single-leaf standard tree carrying the given label statistics.
TreeModel make_leaf_tree(const Task& task, std::uint32_t n_features, const LabelSummary& labels);

/// Top tree consisting of a single leaf with bucket index 0.
TreeModel make_single_leaf_top_tree(const Task& task, std::uint32_t n_features);

/// Replaces leaf `leaf_node` of top tree `host` by the whole of `graft` (a
/// top tree). The graft's first leaf keeps the host leaf's bucket index,
/// its other leaves receive fresh indices host.n_leaves(), ... in graft
/// order. Returns the bucket index each graft leaf ends up with.
std::vector<std::uint64_t> graft_top_tree(TreeModel& host, std::uint32_t leaf_node, const TreeModel& graft);

// Serialization, little-endian:
//   "CTRE" | version u16 | mode u8 | d u32 | k u32 | node count u64
//   per node: kind u8 | feature i32 | threshold f32 | left u32 | right u32
//             | leaf payload (k x u64 histogram | f64 mean + u64 count | u64 bucket)
inline constexpr std::uint16_t kTreeFormatVersion = 1;

std::vector<char> serialize_tree(const TreeModel& tree);
void serialize_tree(const TreeModel& tree, std::vector<char>& out);
/// Throws FormatError on bad magic, version, truncation or an invalid tree.
TreeModel deserialize_tree(std::span<const char> bytes);

}  // namespace canopy
