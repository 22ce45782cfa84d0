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

#include "canopy/forest.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>

#include "canopy/error.hpp"
#include "canopy/kernels.hpp"
#include "canopy/random.hpp"

namespace canopy {

Scheme parse_scheme(const std::string& name) {
  if (name == "woody") return Scheme::woody;
  if (name == "subsets") return Scheme::subsets;
  if (name == "standard") return Scheme::standard;
  throw ConfigError("unknown scheme '" + name + "' (expected woody, subsets or standard)");
}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::woody: return "woody";
    case Scheme::subsets: return "subsets";
    case Scheme::standard: return "standard";
  }
  return "?";
}

void ForestConfig::validate() const {
  if (n_top < 1) throw ConfigError("number of top trees must be at least 1");
  if (n_b < 1) throw ConfigError("bottom trees per top tree must be at least 1");
  if (subset_size && *subset_size < 1) throw ConfigError("subset size must be at least 1");
  if (leaf_bucket_size && *leaf_bucket_size < 2) throw ConfigError("leaf bucket size must be at least 2");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (!(hard_cap_multiplier >= 1.0)) throw ConfigError("hard-cap multiplier must be at least 1");
  if (baseline_subset_size < 1) throw ConfigError("baseline subset size must be at least 1");
  if (bottom.mode != TreeMode::standard) throw ConfigError("bottom trees must use standard mode");
  if (bottom.min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
  if (bottom.gain.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
  if (!(bottom.gain.lambda >= 0.0 && bottom.gain.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
}

std::uint64_t default_subset_and_leaf_size(std::uint64_t n) {
  const double grown = std::max(100.0 * std::sqrt(static_cast<double>(n)), 100000.0);
  return std::min<std::uint64_t>({500000, n, static_cast<std::uint64_t>(grown)});
}

std::uint32_t sqrt_features(std::uint32_t d) {
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::sqrt(static_cast<double>(d))));
}

std::size_t ForestModel::total_trees() const {
  std::size_t total = 0;
  for (const TopUnit& u : units) total += u.bottoms.empty() ? 0 : u.bottoms.front().size();
  return total;
}

void ForestModel::validate() const {
  if (units.empty()) throw DomainError("forest without units");
  for (const TopUnit& u : units) {
    if (u.top.mode() != TreeMode::top) throw DomainError("unit root is not a top tree");
    if (u.top.n_features() != n_features) throw DomainError("top tree feature count differs from forest");
    if (u.bottoms.size() != u.top.n_leaves()) throw DomainError("bottom-tree lists do not match top-tree leaves");
    const std::size_t n_b = u.bottoms.front().size();
    if (n_b == 0) throw DomainError("top-tree leaf without bottom trees");
    for (const auto& trees : u.bottoms) {
      if (trees.size() != n_b) throw DomainError("top-tree leaves carry different numbers of bottom trees");
      for (const TreeModel& t : trees) {
        if (t.n_features() != n_features || !(t.task() == task) || t.mode() != TreeMode::standard)
          throw DomainError("bottom tree disagrees with the forest on d or task");
      }
    }
  }
}

std::uint64_t BucketManifest::rows_for(std::uint32_t top_tree) const {
  std::uint64_t total = 0;
  for (const auto& b : buckets)
    if (b.id.top_tree == top_tree) total += b.rows;
  return total;
}

std::uint64_t BucketManifest::max_rows() const {
  std::uint64_t m = 0;
  for (const auto& b : buckets) m = std::max(m, b.rows);
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Impurity resolve_top_measure(const ForestConfig& config, const Task& task) {
  if (!task.is_classification()) return Impurity::variance;
  if (config.top_measure == Impurity::variance) throw ConfigError("variance criterion on a classification task");
  return config.top_measure;
}

BuildParams resolve_bottom(const ForestConfig& config, const Task& task, std::uint32_t d) {
  BuildParams p = config.bottom;
  p.mode = TreeMode::standard;
  if (!task.is_classification()) p.gain.measure = Impurity::variance;
  else if (p.gain.measure == Impurity::variance) throw ConfigError("variance criterion on a classification task");
  if (!p.gain.features_per_node) p.gain.features_per_node = sqrt_features(d);
  p.gain.features_per_node = std::min(*p.gain.features_per_node, d);
  return p;
}

void echo_common(ForestModel& m, Scheme scheme, const ForestConfig& c, const BuildParams& bottom) {
  m.config_echo = {
      {"scheme", to_string(scheme)},
      {"n_top", std::to_string(c.n_top)},
      {"n_b", std::to_string(c.n_b)},
      {"seed", std::to_string(c.seed)},
      {"bootstrap", c.bootstrap ? "1" : "0"},
      {"criterion", to_string(bottom.gain.measure)},
      {"max_features", std::to_string(*bottom.gain.features_per_node)},
      {"min_samples_split", std::to_string(bottom.min_samples_split)},
      {"min_samples_leaf", std::to_string(bottom.gain.min_samples_leaf)},
      {"max_depth", bottom.max_depth ? std::to_string(*bottom.max_depth) : "none"},
  };
}

std::filesystem::path scratch_root(const ForestConfig& config) {
  if (!config.scratch_dir.empty()) return config.scratch_dir;
  if (const char* env = std::getenv("CANOPY_SCRATCH"); env != nullptr && *env != '\0') return env;
  return std::filesystem::temp_directory_path() / "canopy-scratch";
}

std::string fresh_run_id(std::uint64_t seed) {
  static std::atomic<std::uint64_t> sequence{0};
  const auto now = static_cast<std::uint64_t>(Clock::now().time_since_epoch().count());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "run-%llx-%d-%llx-%llu", static_cast<unsigned long long>(seed),
                static_cast<int>(::getpid()), static_cast<unsigned long long>(now),
                static_cast<unsigned long long>(sequence.fetch_add(1)));
  return buf;
}

/// Owns the scratch store and removes its run directory when done.
struct ScratchRun {
  std::unique_ptr<ScratchStore> store;
  std::filesystem::path run_dir;
  bool keep = false;

  ScratchRun(const ForestConfig& config, ResidentCounter* counter) : keep(config.keep_scratch) {
    if (config.store == StoreKind::memory) {
      store = make_memory_store(counter);
    } else {
      const auto root = scratch_root(config);
      const auto id = fresh_run_id(config.seed);
      run_dir = root / id;
      store = make_disk_store(root, id, counter);
    }
    store->set_write_buffer_rows(config.write_buffer_rows);
  }
  ~ScratchRun() {
    store.reset();
    if (!keep && !run_dir.empty()) {
      std::error_code ec;
      std::filesystem::remove_all(run_dir, ec);
    }
  }
};

std::vector<LabelSummary> leaf_summaries(const Block& subset, const Task& task, std::size_t n_leaves,
                                         std::span<const std::uint64_t> assignment) {
  std::vector<LabelSummary> out(n_leaves, LabelSummary::for_task(task));
  for (std::size_t r = 0; r < subset.size(); ++r) out[assignment[r]].add(subset.y[r], 1.0);
  return out;
}

std::uint32_t find_leaf_node(const TreeModel& top, std::uint64_t bucket) {
  const auto nodes = top.nodes();
  for (std::uint32_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].leaf && nodes[i].bucket == bucket) return i;
  throw DomainError("top tree has no leaf with bucket " + std::to_string(bucket));
}

// Temporary leaf ids used while an oversized bucket is split up.
constexpr std::uint64_t kStagingLeaf = std::uint64_t{1} << 48;

struct ResplitContext {
  const ForestConfig& config;
  const Task& task;
  std::uint32_t d;
  std::uint64_t R;
  std::uint64_t M;
  std::size_t chunk;
  ScratchStore& store;
  std::vector<TreeModel>& tops;
  std::vector<std::vector<LabelSummary>>& fallback;
  ResidentCounter* counter;
};

// Re-partitions buckets holding more than hard_cap rows by growing a top
// tree on a random subset of the bucket and grafting it onto the host leaf.
std::size_t resplit_oversized(ResplitContext& ctx, BucketManifest& manifest) {
  const double cap = ctx.config.hard_cap_multiplier * static_cast<double>(ctx.M);
  std::deque<BucketRecord> work;
  for (const auto& b : manifest.buckets)
    if (static_cast<double>(b.rows) > cap) work.push_back(b);
  std::size_t resplits = 0;
  std::uint64_t round = 0;

  while (!work.empty()) {
    const BucketRecord rec = work.front();
    work.pop_front();
    const std::uint32_t t = rec.id.top_tree;
    ++round;

    // Algorithm R over the bucket, streamed.
    const std::uint64_t want = std::min(ctx.R, rec.rows);
    Rng rng = make_rng(ctx.config.seed, {0x5e511, t, rec.id.leaf, round});
    Block subset(ctx.d);
    subset.reserve(want);
    ResidentRows hold(ctx.counter, 0);
    std::uint64_t seen = 0;
    ctx.store.for_each_chunk(rec.id, ctx.chunk, [&](const Block& rows, std::span<const std::uint32_t>) {
      for (std::size_t i = 0; i < rows.size(); ++i, ++seen) {
        if (subset.size() < want) {
          subset.push_row(rows.row(i), rows.y[i]);
        } else {
          const std::uint64_t j = uniform_below(rng, seen + 1);
          if (j < want) {
            const auto src = rows.row(i);
            std::copy(src.begin(), src.end(), subset.row(static_cast<std::size_t>(j)).begin());
            subset.y[static_cast<std::size_t>(j)] = rows.y[i];
          }
        }
      }
      hold.resize(static_cast<std::int64_t>(subset.size()));
    });

    const double threshold = estimate_leaf_threshold(static_cast<double>(ctx.M), subset.size(), rec.rows);
    const BuildParams params = BuildParams::top_tree(threshold, ctx.config.lambda, resolve_top_measure(ctx.config, ctx.task));
    std::vector<std::uint64_t> assignment;
    const TreeModel sub = build_top_tree(subset, ctx.task, params, rng, &assignment);
    if (sub.n_leaves() <= 1) continue;  // unsplittable: identical rows
    const auto sub_labels = leaf_summaries(subset, ctx.task, sub.n_leaves(), assignment);
    hold.resize(0);
    subset = Block(ctx.d);

    // Route the bucket through the sub tree into staging buckets.
    const std::uint32_t n_b = [&] {
      std::uint32_t nb = 0;
      ctx.store.for_each_chunk(rec.id, 1, [&](const Block&, std::span<const std::uint32_t> w) {
        nb = static_cast<std::uint32_t>(w.size());
      });
      return nb;
    }();
    std::vector<std::unique_ptr<BucketWriter>> writers;
    for (std::size_t j = 0; j < sub.n_leaves(); ++j)
      writers.push_back(ctx.store.open_writer({t, kStagingLeaf + j}, ctx.task, ctx.d, n_b));
    std::vector<std::uint64_t> leaf_of;
    ctx.store.for_each_chunk(rec.id, ctx.chunk, [&](const Block& rows, std::span<const std::uint32_t> weights) {
      leaf_of.resize(rows.size());
      kernels::route_rows(sub, rows, leaf_of, ctx.config.jobs);
      for (std::size_t i = 0; i < rows.size(); ++i)
        writers[leaf_of[i]]->append_row(rows.row(i), rows.y[i], weights.subspan(i * n_b, n_b));
    });
    std::vector<std::uint64_t> sizes;
    for (auto& w : writers) sizes.push_back(w->finish().rows);
    writers.clear();

    if (*std::max_element(sizes.begin(), sizes.end()) == rec.rows) {
      // No progress on the full bucket; keep it whole.
      for (std::size_t j = 0; j < sizes.size(); ++j) ctx.store.erase({t, kStagingLeaf + j});
      continue;
    }

    const auto mapping = graft_top_tree(ctx.tops[t], find_leaf_node(ctx.tops[t], rec.id.leaf), sub);
    ctx.store.erase(rec.id);
    auto& labels = ctx.fallback[t];
    labels.resize(ctx.tops[t].n_leaves(), LabelSummary::for_task(ctx.task));
    auto& records = manifest.buckets;
    records.erase(std::remove_if(records.begin(), records.end(), [&](const BucketRecord& b) { return b.id == rec.id; }),
                  records.end());
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      const BucketId id{t, mapping[j]};
      ctx.store.rename({t, kStagingLeaf + j}, id);
      labels[mapping[j]] = sub_labels[j];
      BucketRecord fresh{id, sizes[j], ctx.store.kind() == StoreKind::disk ? "disk" : "memory"};
      records.push_back(fresh);
      if (static_cast<double>(fresh.rows) > cap) work.push_back(fresh);
    }
    ++resplits;
  }
  std::sort(manifest.buckets.begin(), manifest.buckets.end(),
            [](const BucketRecord& a, const BucketRecord& b) { return a.id < b.id; });
  return resplits;
}

std::vector<TreeModel> grow_bottom_trees(const Bucket& bucket, const Task& task, std::uint32_t d, std::uint32_t n_b,
                                         const BuildParams& params, const LabelSummary& fallback, std::uint64_t seed,
                                         BucketId id) {
  std::vector<TreeModel> trees;
  trees.reserve(n_b);
  if (bucket.size() == 0) {
    for (std::uint32_t b = 0; b < n_b; ++b) trees.push_back(make_leaf_tree(task, d, fallback));
    return trees;
  }
  std::vector<std::uint32_t> column(bucket.size());
  for (std::uint32_t b = 0; b < n_b; ++b) {
    std::uint64_t total = 0;
    for (std::size_t r = 0; r < bucket.size(); ++r) {
      column[r] = bucket.weight(r, b);
      total += column[r];
    }
    if (total == 0) {
      trees.push_back(make_leaf_tree(task, d, summarize(bucket.rows, [&] {
        std::vector<std::size_t> all(bucket.size());
        for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
        return all;
      }(), {}, task)));
      continue;
    }
    Rng rng = make_rng(seed, {0xb0770, id.top_tree, id.leaf, b});
    trees.push_back(build_tree(bucket.rows, column, task, params, rng));
  }
  return trees;
}

}  // namespace

BucketManifest distribute(std::span<const TreeModel> top_trees, const DatasetHandle& dataset, ScratchStore& store,
                          std::uint32_t n_b, std::uint64_t seed, bool bootstrap, int jobs, ResidentCounter* counter) {
  if (n_b < 1) throw ConfigError("n_b must be at least 1");
  const std::uint32_t d = dataset.n_features();
  const Task& task = dataset.task();
  for (const TreeModel& t : top_trees) {
    if (t.mode() != TreeMode::top) throw DomainError("distribute needs top trees");
    if (t.n_features() != d) throw DomainError("top tree feature count differs from dataset");
  }

  std::vector<std::vector<std::unique_ptr<BucketWriter>>> writers(top_trees.size());
  BucketManifest manifest;
  try {
    for (std::uint32_t t = 0; t < top_trees.size(); ++t)
      for (std::uint64_t leaf = 0; leaf < top_trees[t].n_leaves(); ++leaf)
        writers[t].push_back(store.open_writer({t, leaf}, task, d, n_b));

    ChunkStream stream = dataset.chunks(counter);
    Chunk chunk;
    std::vector<std::uint64_t> leaf_of;
    std::vector<std::uint32_t> weights;
    while (stream.next(chunk)) {
      const std::size_t m = chunk.rows.size();
      leaf_of.resize(m);
      weights.resize(m * n_b);
      for (std::uint32_t t = 0; t < top_trees.size(); ++t) {
        kernels::route_rows(top_trees[t], chunk.rows, leaf_of, jobs);
        if (bootstrap)
          kernels::bootstrap_weights(seed, t, chunk.first_row, m, n_b, weights, jobs);
        else
          std::fill(weights.begin(), weights.end(), 1u);
        for (std::size_t i = 0; i < m; ++i) {
          writers[t][leaf_of[i]]->append_row(chunk.rows.row(i), chunk.rows.y[i],
                                              std::span<const std::uint32_t>(weights).subspan(i * n_b, n_b));
        }
      }
    }
    for (std::uint32_t t = 0; t < writers.size(); ++t) {
      for (std::uint64_t leaf = 0; leaf < writers[t].size(); ++leaf) {
        const BucketReceipt receipt = writers[t][leaf]->finish();
        manifest.buckets.push_back({receipt.id, receipt.rows, receipt.location});
        writers[t][leaf].reset();
      }
    }
  } catch (const StorageError& e) {
    std::string done;
    for (const auto& b : manifest.buckets)
      done += " (" + std::to_string(b.id.top_tree) + "," + std::to_string(b.id.leaf) + ")=" + std::to_string(b.rows);
    throw StorageError(std::string(e.what()) + "; completed buckets:" + (done.empty() ? " none" : done));
  }
  return manifest;
}

ForestModel build_big_forest(const DatasetHandle& dataset, const ForestConfig& config, TrainingReport* report) {
  config.validate();
  const auto start = Clock::now();
  const std::uint64_t n = dataset.n_rows();
  const std::uint32_t d = dataset.n_features();
  const Task task = dataset.task();
  const std::uint64_t R = config.subset_size.value_or(default_subset_and_leaf_size(n));
  const std::uint64_t M = config.leaf_bucket_size.value_or(default_subset_and_leaf_size(n));
  if (R > n) throw ConfigError("subset size R = " + std::to_string(R) + " exceeds n = " + std::to_string(n));
  const BuildParams bottom = resolve_bottom(config, task, d);
  bottom.validate(d);

  ResidentCounter counter;
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;
  rep = TrainingReport{};
  rep.subset_size = R;
  rep.leaf_bucket_size = M;
  rep.chunk_size = dataset.chunk_size();

  // Phase 1: random subsets (one pass) and top trees.
  std::vector<TreeModel> tops(config.n_top);
  std::vector<std::vector<LabelSummary>> fallback(config.n_top);
  {
    std::vector<std::uint64_t> seeds(config.n_top);
    for (std::uint32_t t = 0; t < config.n_top; ++t) seeds[t] = derive_seed(config.seed, {0x5b5e7, t});
    auto subsets = reservoir_sample_many(dataset, R, seeds, &counter);
    const double threshold = estimate_leaf_threshold(static_cast<double>(M), subsets.front().rows.size(), n);
    const BuildParams params = BuildParams::top_tree(threshold, config.lambda, resolve_top_measure(config, task));
    kernels::parallel_for(config.n_top, config.jobs, [&](std::size_t t) {
      Rng rng = make_rng(config.seed, {0x70b, t});
      std::vector<std::uint64_t> assignment;
      tops[t] = build_top_tree(subsets[t].rows, task, params, rng, &assignment);
      fallback[t] = leaf_summaries(subsets[t].rows, task, tops[t].n_leaves(), assignment);
    });
  }
  rep.sample_top_seconds = seconds_since(start);

  // Phase 2: distribute every row to its leaf bucket.
  const auto distribute_start = Clock::now();
  ScratchRun scratch(config, &counter);
  BucketManifest manifest =
      distribute(tops, dataset, *scratch.store, config.n_b, config.seed, config.bootstrap, config.jobs, &counter);
  if (scratch.store->kind() == StoreKind::disk) {
    std::uint64_t buckets = 0;
    for (const auto& t : tops) buckets += t.n_leaves();
    rep.write_buffer_budget = buckets * scratch.store->write_buffer_rows();
  }
  ResplitContext ctx{config, task, d, R, M, dataset.chunk_size(), *scratch.store, tops, fallback, &counter};
  rep.n_resplits = resplit_oversized(ctx, manifest);
  rep.distribute_seconds = seconds_since(distribute_start);
  rep.peak_resident_phase12 = counter.peak();
  rep.max_bucket_rows = manifest.max_rows();
  rep.n_buckets = manifest.buckets.size();

  // Phase 3: bottom trees per bucket.
  const auto bottom_start = Clock::now();
  counter.reset_peak();
  ForestModel model;
  model.task = task;
  model.n_features = d;
  model.combiner = task.is_classification() ? Combiner::vote : Combiner::mean;
  model.units.resize(config.n_top);
  for (std::uint32_t t = 0; t < config.n_top; ++t) {
    model.units[t].top = std::move(tops[t]);
    model.units[t].bottoms.resize(model.units[t].top.n_leaves());
  }
  kernels::parallel_for(manifest.buckets.size(), config.jobs, [&](std::size_t i) {
    const BucketId id = manifest.buckets[i].id;
    const Bucket bucket = scratch.store->read(id);
    model.units[id.top_tree].bottoms[id.leaf] = grow_bottom_trees(
        bucket, task, d, config.n_b, bottom, fallback[id.top_tree][id.leaf], config.seed, id);
  });
  rep.bottom_seconds = seconds_since(bottom_start);
  rep.peak_resident_phase3 = counter.peak();

  echo_common(model, Scheme::woody, config, bottom);
  model.config_echo.insert(model.config_echo.end(),
                           {{"subset_size", std::to_string(R)},
                            {"leaf_bucket_size", std::to_string(M)},
                            {"lambda", fmt_double(config.lambda)},
                            {"top_criterion", to_string(resolve_top_measure(config, task))},
                            {"hard_cap_multiplier", fmt_double(config.hard_cap_multiplier)}});
  model.validate();
  rep.total_seconds = seconds_since(start);
  return model;
}

ForestModel build_subsets_forest(const DatasetHandle& dataset, const ForestConfig& config, TrainingReport* report) {
  config.validate();
  const auto start = Clock::now();
  const std::uint64_t n = dataset.n_rows();
  const std::uint32_t d = dataset.n_features();
  const Task task = dataset.task();
  const std::uint32_t total = config.total_trees();
  const std::uint64_t size = std::min(config.baseline_subset_size, n);
  const BuildParams bottom = resolve_bottom(config, task, d);
  bottom.validate(d);

  ResidentCounter counter;
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;
  rep = TrainingReport{};
  rep.subset_size = size;
  rep.chunk_size = dataset.chunk_size();

  std::vector<std::uint64_t> seeds(total);
  for (std::uint32_t i = 0; i < total; ++i) seeds[i] = derive_seed(config.seed, {0x5ab5e7, i});
  auto subsets = reservoir_sample_many(dataset, size, seeds, &counter);
  rep.sample_top_seconds = seconds_since(start);
  rep.peak_resident_phase12 = counter.peak();

  const auto bottom_start = Clock::now();
  counter.reset_peak();
  ForestModel model;
  model.task = task;
  model.n_features = d;
  model.combiner = task.is_classification() ? Combiner::vote : Combiner::mean;
  model.units.resize(total);
  kernels::parallel_for(total, config.jobs, [&](std::size_t i) {
    Rng rng = make_rng(config.seed, {0x5ab7, i});
    TopUnit& unit = model.units[i];
    unit.top = make_single_leaf_top_tree(task, d);
    unit.bottoms.resize(1);
    unit.bottoms[0].push_back(build_tree(subsets[i].rows, {}, task, bottom, rng));
  });
  rep.bottom_seconds = seconds_since(bottom_start);
  rep.peak_resident_phase3 = counter.peak();
  rep.max_bucket_rows = size;
  rep.n_buckets = total;

  echo_common(model, Scheme::subsets, config, bottom);
  model.config_echo.push_back({"baseline_subset_size", std::to_string(size)});
  model.validate();
  rep.total_seconds = seconds_since(start);
  return model;
}

ForestModel build_standard_forest(const DatasetHandle& dataset, const ForestConfig& config, TrainingReport* report) {
  config.validate();
  const auto start = Clock::now();
  const std::uint32_t d = dataset.n_features();
  const Task task = dataset.task();
  const std::uint32_t total = config.total_trees();
  const BuildParams bottom = resolve_bottom(config, task, d);
  bottom.validate(d);

  ResidentCounter counter;
  TrainingReport local;
  TrainingReport& rep = report != nullptr ? *report : local;
  rep = TrainingReport{};
  rep.chunk_size = dataset.chunk_size();

  const Block all = dataset.materialize();
  ResidentRows hold(&counter, static_cast<std::int64_t>(all.size()));
  const std::size_t n = all.size();
  rep.sample_top_seconds = seconds_since(start);
  rep.peak_resident_phase12 = counter.peak();

  const auto bottom_start = Clock::now();
  ForestModel model;
  model.task = task;
  model.n_features = d;
  model.combiner = task.is_classification() ? Combiner::vote : Combiner::mean;
  model.units.resize(total);
  kernels::parallel_for(total, config.jobs, [&](std::size_t i) {
    Rng rng = make_rng(config.seed, {0x57d, i});
    std::vector<std::uint32_t> weights;
    if (config.bootstrap) {
      weights.assign(n, 0);
      for (std::size_t draw = 0; draw < n; ++draw) ++weights[uniform_below(rng, n)];
    }
    TopUnit& unit = model.units[i];
    unit.top = make_single_leaf_top_tree(task, d);
    unit.bottoms.resize(1);
    unit.bottoms[0].push_back(build_tree(all, weights, task, bottom, rng));
  });
  rep.bottom_seconds = seconds_since(bottom_start);
  rep.peak_resident_phase3 = counter.peak();
  rep.max_bucket_rows = n;
  rep.n_buckets = 1;

  echo_common(model, Scheme::standard, config, bottom);
  model.validate();
  rep.total_seconds = seconds_since(start);
  return model;
}

ForestModel train_forest(Scheme scheme, const DatasetHandle& dataset, const ForestConfig& config,
                         TrainingReport* report) {
  switch (scheme) {
    case Scheme::woody: return build_big_forest(dataset, config, report);
    case Scheme::subsets: return build_subsets_forest(dataset, config, report);
    case Scheme::standard: return build_standard_forest(dataset, config, report);
  }
  throw ConfigError("unknown scheme");
}

std::uint32_t vote_argmax(std::span<const std::uint64_t> votes) {
  if (votes.empty()) throw DomainError("no classes to vote on");
  return static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

namespace {

double combine_one(const ForestModel& model, const float* pattern, std::vector<std::uint64_t>& votes) {
  if (model.combiner == Combiner::vote) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const TopUnit& u : model.units) {
      const std::uint64_t bucket = u.top.nodes()[u.top.find_leaf_unchecked(pattern)].bucket;
      for (const TreeModel& t : u.bottoms[bucket]) ++votes[static_cast<std::size_t>(t.nodes()[t.find_leaf_unchecked(pattern)].label)];
    }
    return vote_argmax(votes);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (const TopUnit& u : model.units) {
    const std::uint64_t bucket = u.top.nodes()[u.top.find_leaf_unchecked(pattern)].bucket;
    for (const TreeModel& t : u.bottoms[bucket]) {
      sum += t.nodes()[t.find_leaf_unchecked(pattern)].label;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

void check_patterns(const ForestModel& model, std::uint32_t d) {
  if (d != model.n_features)
    throw DomainError("patterns have " + std::to_string(d) + " features, model expects " +
                      std::to_string(model.n_features));
}

}  // namespace

std::vector<double> predict_forest(const ForestModel& model, const Block& patterns, int jobs) {
  check_patterns(model, patterns.n_features);
  std::vector<double> out(patterns.size());
  const auto n = static_cast<std::int64_t>(patterns.size());
  const std::size_t k = model.task.n_classes;
#pragma omp parallel num_threads(jobs < 1 ? 1 : jobs)
  {
    std::vector<std::uint64_t> votes(k);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] = combine_one(model, patterns.x.data() + i * patterns.n_features, votes);
  }
  return out;
}

std::vector<double> predict_forest_serial(const ForestModel& model, const Block& patterns) {
  check_patterns(model, patterns.n_features);
  std::vector<double> out(patterns.size());
  std::vector<std::uint64_t> votes(model.task.n_classes);
  for (std::size_t i = 0; i < patterns.size(); ++i) out[i] = combine_one(model, patterns.row(i).data(), votes);
  return out;
}

double predict_forest(const ForestModel& model, std::span<const float> pattern) {
  check_patterns(model, static_cast<std::uint32_t>(pattern.size()));
  std::vector<std::uint64_t> votes(model.task.n_classes);
  return combine_one(model, pattern.data(), votes);
}

std::vector<double> predict_dataset(const ForestModel& model, const DatasetHandle& dataset, int jobs) {
  check_patterns(model, dataset.n_features());
  std::vector<double> out;
  out.reserve(dataset.n_rows());
  ChunkStream stream = dataset.chunks();
  Chunk chunk;
  while (stream.next(chunk)) {
    const auto part = predict_forest(model, chunk.rows, jobs);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace canopy
