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

#include "canopy/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "canopy/error.hpp"

namespace canopy {

// Mutable access to a TreeModel while it is being assembled.
class TreeAssembler {
 public:
  TreeAssembler(TreeMode mode, const Task& task, std::uint32_t d) {
    model_.mode_ = mode;
    model_.task_ = task;
    model_.n_features_ = d;
  }
  explicit TreeAssembler(TreeModel&& model) : model_(std::move(model)) {}

  std::uint32_t add_node() {
    model_.nodes_.emplace_back();
    return static_cast<std::uint32_t>(model_.nodes_.size() - 1);
  }
  TreeNode& node(std::uint32_t i) { return model_.nodes_[i]; }
  std::size_t size() const { return model_.nodes_.size(); }
  std::vector<TreeNode>& nodes() { return model_.nodes_; }

  void make_split(std::uint32_t i, std::uint32_t feature, float threshold) {
    TreeNode& n = model_.nodes_[i];
    n.leaf = false;
    n.feature = static_cast<std::int32_t>(feature);
    n.threshold = threshold;
  }

  void make_label_leaf(std::uint32_t i, const LabelSummary& s) {
    TreeNode& n = model_.nodes_[i];
    n.leaf = true;
    n.feature = -1;
    if (model_.task_.is_classification()) {
      n.payload = static_cast<std::uint32_t>(model_.histograms_.size() / model_.task_.n_classes);
      for (double c : s.counts) model_.histograms_.push_back(static_cast<std::uint64_t>(std::llround(c)));
      n.count = static_cast<std::uint64_t>(std::llround(s.weight));
    } else {
      n.mean = s.sum / s.weight;
      n.count = static_cast<std::uint64_t>(std::llround(s.weight));
    }
  }

  void make_bucket_leaf(std::uint32_t i, std::uint64_t bucket) {
    TreeNode& n = model_.nodes_[i];
    n.leaf = true;
    n.feature = -1;
    n.bucket = bucket;
  }

  TreeModel take() {
    model_.finalize();
    return std::move(model_);
  }

  static std::vector<TreeNode>& nodes_of(TreeModel& m) { return m.nodes_; }
  static void finalize(TreeModel& m) { m.finalize(); }

 private:
  TreeModel model_;
};

void TreeModel::finalize() {
  n_leaves_ = 0;
  depth_ = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, depth] = stack.back();
    stack.pop_back();
    depth_ = std::max(depth_, depth);
    TreeNode& n = nodes_[i];
    if (!n.leaf) {
      stack.push_back({n.left, depth + 1});
      stack.push_back({n.right, depth + 1});
      continue;
    }
    ++n_leaves_;
    if (mode_ == TreeMode::top) {
      n.label = static_cast<double>(n.bucket);
    } else if (task_.is_classification()) {
      const auto h = histogram(n);
      n.label = static_cast<double>(std::max_element(h.begin(), h.end()) - h.begin());
    } else {
      n.label = n.mean;
    }
  }
}

bool TreeModel::operator==(const TreeModel& o) const { return serialize_tree(*this) == serialize_tree(o); }

std::uint32_t TreeModel::find_leaf(std::span<const float> pattern) const {
  if (pattern.size() != n_features_)
    throw DomainError("pattern has " + std::to_string(pattern.size()) + " features, tree expects " +
                      std::to_string(n_features_));
  return find_leaf_unchecked(pattern.data());
}

BuildParams BuildParams::top_tree(double leaf_threshold, double lambda, Impurity measure) {
  BuildParams p;
  p.mode = TreeMode::top;
  p.leaf_threshold = leaf_threshold;
  p.gain.lambda = lambda;
  p.gain.measure = measure;
  p.gain.features_per_node.reset();
  return p;
}

void BuildParams::validate(std::uint32_t n_features) const {
  gain.validate(n_features);
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
  if (mode == TreeMode::top && !(leaf_threshold >= 2.0)) throw ConfigError("top-tree leaf threshold must be >= 2");
}

double estimate_leaf_threshold(double M, std::uint64_t R, std::uint64_t n) {
  if (!(M >= 1.0)) throw ConfigError("leaf bucket size M must be at least 1");
  if (R < 1 || n < 1) throw ConfigError("subset size and dataset size must be positive");
  if (R > n) throw ConfigError("subset size R exceeds the number of rows n");
  return std::max(2.0, M * static_cast<double>(R) / static_cast<double>(n));
}

namespace {

bool is_pure(const Block& rows, std::span<const std::size_t> node, const LabelSummary& s) {
  if (s.is_classification()) {
    return std::count_if(s.counts.begin(), s.counts.end(), [](double c) { return c > 0.0; }) <= 1;
  }
  const double first = rows.y[node.front()];
  return std::all_of(node.begin(), node.end(), [&](std::size_t r) { return rows.y[r] == first; });
}

void check_rows(const Block& rows, const Task& task) {
  if (rows.empty()) throw DomainError("cannot build a tree on zero rows");
  if (task.is_classification()) {
    for (double y : rows.y)
      if (!(y >= 0.0) || y >= task.n_classes) throw DomainError("class label outside [0, k)");
  }
}

struct Work {
  std::size_t begin;
  std::size_t end;
  std::uint32_t depth;
  std::uint32_t parent;
  bool is_left;
  ConstantMask constant;
};

void link(TreeAssembler& a, const Work& w, std::uint32_t id) {
  if (w.parent == std::numeric_limits<std::uint32_t>::max()) return;
  if (w.is_left)
    a.node(w.parent).left = id;
  else
    a.node(w.parent).right = id;
}

std::size_t partition_rows(const Block& rows, std::vector<std::size_t>& index, std::size_t begin, std::size_t end,
                           const SplitCandidate& split) {
  auto mid = std::stable_partition(index.begin() + static_cast<std::ptrdiff_t>(begin),
                                   index.begin() + static_cast<std::ptrdiff_t>(end),
                                   [&](std::size_t r) { return rows.at(r, split.feature) <= split.threshold; });
  return static_cast<std::size_t>(mid - index.begin());
}

constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

}  // namespace

TreeModel build_tree(const Block& rows, std::span<const std::uint32_t> weights, const Task& task,
                     const BuildParams& params, Rng& rng) {
  params.validate(rows.n_features);
  check_rows(rows, task);
  if (!weights.empty() && weights.size() != rows.size()) throw DomainError("one weight per row required");

  std::vector<std::size_t> index;
  index.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (weights.empty() || weights[r] > 0) index.push_back(r);
  if (index.empty()) throw DomainError("total weight is zero");

  TreeAssembler a(TreeMode::standard, task, rows.n_features);
  std::vector<Work> stack;
  stack.push_back({0, index.size(), 0, kNoParent, false, ConstantMask(rows.n_features, false)});
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    const std::uint32_t id = a.add_node();
    link(a, w, id);

    const std::span<const std::size_t> node(index.data() + w.begin, w.end - w.begin);
    const LabelSummary summary = summarize(rows, node, weights, task);
    std::optional<SplitCandidate> split;
    if (!is_pure(rows, node, summary) && node.size() >= params.min_samples_split &&
        (!params.max_depth || w.depth < *params.max_depth)) {
      split = best_split(rows, node, weights, params.gain, task, rng, &w.constant);
    }
    if (!split) {
      a.make_label_leaf(id, summary);
      continue;
    }
    a.make_split(id, split->feature, split->threshold);
    const std::size_t mid = partition_rows(rows, index, w.begin, w.end, *split);
    // Right is pushed first so that the left subtree is laid out next (pre-order).
    stack.push_back({mid, w.end, w.depth + 1, id, false, w.constant});
    stack.push_back({w.begin, mid, w.depth + 1, id, true, std::move(w.constant)});
  }
  return a.take();
}

TreeModel build_top_tree(const Block& subset, const Task& task, const BuildParams& params, Rng& rng,
                         std::vector<std::uint64_t>* assignment) {
  if (params.mode != TreeMode::top) throw ConfigError("build_top_tree needs top-tree parameters");
  params.validate(subset.n_features);
  check_rows(subset, task);
  GainConfig gain = params.gain;
  gain.features_per_node.reset();

  std::vector<std::size_t> index(subset.size());
  for (std::size_t r = 0; r < index.size(); ++r) index[r] = r;
  if (assignment != nullptr) assignment->assign(subset.size(), 0);

  TreeAssembler a(TreeMode::top, task, subset.n_features);
  std::uint64_t next_leaf = 0;
  std::vector<Work> stack;
  stack.push_back({0, index.size(), 0, kNoParent, false, ConstantMask(subset.n_features, false)});
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    const std::uint32_t id = a.add_node();
    link(a, w, id);

    const std::span<const std::size_t> node(index.data() + w.begin, w.end - w.begin);
    std::optional<SplitCandidate> split;
    bool stop = static_cast<double>(node.size()) < params.leaf_threshold;
    if (!stop && params.stop_when_pure) stop = is_pure(subset, node, summarize(subset, node, {}, task));
    if (!stop) split = best_split(subset, node, {}, gain, task, rng, &w.constant);
    if (!split) {
      a.make_bucket_leaf(id, next_leaf);
      if (assignment != nullptr)
        for (std::size_t r : node) (*assignment)[r] = next_leaf;
      ++next_leaf;
      continue;
    }
    a.make_split(id, split->feature, split->threshold);
    const std::size_t mid = partition_rows(subset, index, w.begin, w.end, *split);
    // Left pushed first, so the right child is expanded first.
    stack.push_back({w.begin, mid, w.depth + 1, id, true, w.constant});
    stack.push_back({mid, w.end, w.depth + 1, id, false, std::move(w.constant)});
  }
  return a.take();
}

double predict(const TreeModel& tree, std::span<const float> pattern) {
  return tree.nodes()[tree.find_leaf(pattern)].label;
}

std::uint64_t predict_leaf_index(const TreeModel& tree, std::span<const float> pattern) {
  if (tree.mode() != TreeMode::top) throw DomainError("leaf-index queries need a top tree");
  return tree.nodes()[tree.find_leaf(pattern)].bucket;
}

TreeModel make_leaf_tree(const Task& task, std::uint32_t n_features, const LabelSummary& labels) {
  TreeAssembler a(TreeMode::standard, task, n_features);
  a.make_label_leaf(a.add_node(), labels);
  return a.take();
}

TreeModel make_single_leaf_top_tree(const Task& task, std::uint32_t n_features) {
  TreeAssembler a(TreeMode::top, task, n_features);
  a.make_bucket_leaf(a.add_node(), 0);
  return a.take();
}

std::vector<std::uint64_t> graft_top_tree(TreeModel& host, std::uint32_t leaf_node, const TreeModel& graft) {
  if (host.mode() != TreeMode::top || graft.mode() != TreeMode::top) throw DomainError("grafting needs top trees");
  auto& nodes = TreeAssembler::nodes_of(host);
  if (leaf_node >= nodes.size() || !nodes[leaf_node].leaf) throw DomainError("graft target is not a leaf");
  if (graft.n_features() != host.n_features()) throw DomainError("graft feature count differs");

  const std::uint64_t host_bucket = nodes[leaf_node].bucket;
  const std::uint64_t fresh = host.n_leaves();
  std::vector<std::uint64_t> mapping(graft.n_leaves());
  for (std::size_t j = 0; j < mapping.size(); ++j) mapping[j] = j == 0 ? host_bucket : fresh + j - 1;

  const auto base = static_cast<std::uint32_t>(nodes.size());
  auto where = [&](std::uint32_t g) { return g == 0 ? leaf_node : base + g - 1; };
  const auto src = graft.nodes();
  nodes.resize(nodes.size() + src.size() - 1);
  for (std::uint32_t g = 0; g < src.size(); ++g) {
    TreeNode n = src[g];
    if (n.leaf) {
      n.bucket = mapping[n.bucket];
    } else {
      n.left = where(n.left);
      n.right = where(n.right);
    }
    nodes[where(g)] = n;
  }
  TreeAssembler::finalize(host);
  return mapping;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kTreeMagic[4] = {'C', 'T', 'R', 'E'};

template <typename T>
void put(std::vector<char>& out, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("tree bytes truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void serialize_tree(const TreeModel& tree, std::vector<char>& out) {
  out.insert(out.end(), kTreeMagic, kTreeMagic + 4);
  put<std::uint16_t>(out, kTreeFormatVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tree.mode()));
  put<std::uint32_t>(out, tree.n_features());
  put<std::uint32_t>(out, tree.task().n_classes);
  put<std::uint64_t>(out, tree.nodes().size());
  for (const TreeNode& n : tree.nodes()) {
    put<std::uint8_t>(out, n.leaf ? 1 : 0);
    put<std::int32_t>(out, n.leaf ? -1 : n.feature);
    put<float>(out, n.leaf ? 0.0f : n.threshold);
    put<std::uint32_t>(out, n.leaf ? 0 : n.left);
    put<std::uint32_t>(out, n.leaf ? 0 : n.right);
    if (!n.leaf) continue;
    if (tree.mode() == TreeMode::top) {
      put<std::uint64_t>(out, n.bucket);
    } else if (tree.task().is_classification()) {
      for (std::uint64_t c : tree.histogram(n)) put<std::uint64_t>(out, c);
    } else {
      put<double>(out, n.mean);
      put<std::uint64_t>(out, n.count);
    }
  }
}

std::vector<char> serialize_tree(const TreeModel& tree) {
  std::vector<char> out;
  serialize_tree(tree, out);
  return out;
}

TreeModel deserialize_tree(std::span<const char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTreeMagic, 4) != 0) throw FormatError("bad tree magic");
  Reader in(bytes.subspan(4));
  const auto version = in.get<std::uint16_t>();
  if (version != kTreeFormatVersion) throw FormatError("unsupported tree format version " + std::to_string(version));
  const auto mode = in.get<std::uint8_t>();
  if (mode > 1) throw FormatError("unknown tree mode");
  const auto d = in.get<std::uint32_t>();
  const auto k = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  if (d == 0) throw FormatError("tree with zero features");
  if (count == 0 || count > in.remaining() / 17) throw FormatError("implausible node count");

  TreeModel tree;
  tree.mode_ = static_cast<TreeMode>(mode);
  tree.task_ = k > 0 ? Task::classification(k) : Task::regression();
  tree.n_features_ = d;
  tree.nodes_.resize(count);
  std::vector<std::uint64_t> buckets;
  for (auto& n : tree.nodes_) {
    const auto kind = in.get<std::uint8_t>();
    if (kind > 1) throw FormatError("unknown node kind");
    n.leaf = kind == 1;
    n.feature = in.get<std::int32_t>();
    n.threshold = in.get<float>();
    n.left = in.get<std::uint32_t>();
    n.right = in.get<std::uint32_t>();
    if (!n.leaf) {
      if (n.feature < 0 || static_cast<std::uint32_t>(n.feature) >= d) throw FormatError("split feature out of range");
      if (!std::isfinite(n.threshold)) throw FormatError("non-finite threshold");
      continue;
    }
    if (n.feature != -1 || n.left != 0 || n.right != 0 || n.threshold != 0.0f)
      throw FormatError("leaf node with split fields set");
    if (tree.mode_ == TreeMode::top) {
      n.bucket = in.get<std::uint64_t>();
      buckets.push_back(n.bucket);
    } else if (k > 0) {
      n.payload = static_cast<std::uint32_t>(tree.histograms_.size() / k);
      std::uint64_t total = 0;
      for (std::uint32_t c = 0; c < k; ++c) {
        tree.histograms_.push_back(in.get<std::uint64_t>());
        total += tree.histograms_.back();
      }
      n.count = total;
    } else {
      n.mean = in.get<double>();
      n.count = in.get<std::uint64_t>();
    }
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after tree");

  // Single binary tree rooted at 0: every other node has exactly one parent
  // and is reachable from the root.
  std::vector<std::uint8_t> parents(count, 0);
  for (std::uint64_t i = 0; i < count; ++i) {
    const TreeNode& n = tree.nodes_[i];
    if (n.leaf) continue;
    for (std::uint32_t c : {n.left, n.right}) {
      if (c == 0 || c >= count || c == i) throw FormatError("child index out of range");
      if (++parents[c] > 1) throw FormatError("node with two parents");
    }
  }
  std::uint64_t reached = 0;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const TreeNode& n = tree.nodes_[stack.back()];
    stack.pop_back();
    if (++reached > count) throw FormatError("cycle in tree");
    if (!n.leaf) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  if (reached != count) throw FormatError("unreachable nodes in tree");
  if (tree.mode_ == TreeMode::top) {
    std::sort(buckets.begin(), buckets.end());
    for (std::size_t i = 0; i < buckets.size(); ++i)
      if (buckets[i] != i) throw FormatError("top-tree bucket indices are not 0..N-1");
  }
  tree.finalize();
  return tree;
}

}  // namespace canopy
