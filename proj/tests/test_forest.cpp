#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "canopy/error.hpp"
#include "canopy/forest.hpp"
#include "canopy/kernels.hpp"
#include "canopy/synthetic.hpp"
#include "test_util.hpp"

using namespace canopy;
using testutil::TempDir;

namespace {

ForestConfig small_config() {
  ForestConfig c;
  c.jobs = 2;
  c.seed = 42;
  return c;
}

std::uint64_t rows_seen(const TreeModel& t) {
  std::uint64_t total = 0;
  for (const auto& n : t.nodes())
    if (n.leaf)
      for (auto c : t.histogram(n)) total += c;
  return total;
}

// Memory store whose writer for one bucket fails on finish.
class FailingStore : public ScratchStore {
 public:
  explicit FailingStore(BucketId bad) : ScratchStore(nullptr), inner_(make_memory_store()), bad_(bad) {}
  StoreKind kind() const override { return StoreKind::memory; }
  std::unique_ptr<BucketWriter> open_writer(BucketId id, Task task, std::uint32_t d, std::uint32_t n_b) override {
    struct Writer : BucketWriter {
      std::unique_ptr<BucketWriter> inner;
      bool fail = false;
      void append(const Block& rows, std::span<const std::uint32_t> w) override { inner->append(rows, w); }
      void append_row(std::span<const float> x, double y, std::span<const std::uint32_t> w) override {
        inner->append_row(x, y, w);
      }
      BucketReceipt finish() override {
        if (fail) throw StorageError("disk full");
        return inner->finish();
      }
      std::uint64_t rows() const override { return inner->rows(); }
    };
    auto w = std::make_unique<Writer>();
    w->inner = inner_->open_writer(id, task, d, n_b);
    w->fail = id == bad_;
    return w;
  }
  Bucket read(BucketId id) const override { return inner_->read(id); }
  void for_each_chunk(BucketId id, std::size_t c,
                      const std::function<void(const Block&, std::span<const std::uint32_t>)>& fn) const override {
    inner_->for_each_chunk(id, c, fn);
  }
  bool contains(BucketId id) const override { return inner_->contains(id); }
  void erase(BucketId id) override { inner_->erase(id); }
  void rename(BucketId a, BucketId b) override { inner_->rename(a, b); }
  std::vector<BucketId> list() const override { return inner_->list(); }

 private:
  std::unique_ptr<ScratchStore> inner_;
  BucketId bad_;
};

}  // namespace

TEST_SUITE("forest") {
  TEST_CASE("default subset and leaf size") {
    CHECK(default_subset_and_leaf_size(464809) == 100000);
    CHECK(default_subset_and_leaf_size(100000000) == 500000);
    CHECK(default_subset_and_leaf_size(50000) == 50000);
    CHECK(default_subset_and_leaf_size(4000000) == 200000);
    CHECK(sqrt_features(54) == 7);
    CHECK(sqrt_features(1) == 1);
  }

  TEST_CASE("config validation") {
    ForestConfig c;
    c.lambda = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ForestConfig{};
    c.n_b = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ForestConfig{};
    c.leaf_bucket_size = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ForestConfig{};
    c.subset_size = 101;
    const auto h = testutil::memory_handle(testutil::random_block(1, 100, 2, 2), Task::classification(2));
    CHECK_THROWS_AS(build_big_forest(h, c), ConfigError);
    CHECK(parse_scheme("subsets") == Scheme::subsets);
    CHECK_THROWS_AS(parse_scheme("forest"), ConfigError);
  }

  TEST_CASE("distribute: single-leaf top tree gives one bucket with every row") {
    const Block b = testutil::random_block(2, 333, 3, 2);
    const auto h = testutil::memory_handle(b, Task::classification(2), 50);
    auto store = make_memory_store();
    const std::vector<TreeModel> tops{make_single_leaf_top_tree(Task::classification(2), 3)};
    const auto m = distribute(tops, h, *store, 2, 7);
    REQUIRE(m.buckets.size() == 1);
    CHECK(m.buckets[0].rows == 333);
    CHECK(store->read({0, 0}).rows.x == b.x);
  }

  TEST_CASE("distribute: partition, routing audit and bootstrap sums") {
    const Block b = testutil::random_block(3, 5000, 4, 3, 1 << 20);
    const auto h = testutil::memory_handle(b, Task::classification(3), 321);
    std::vector<TreeModel> tops;
    for (int t = 0; t < 3; ++t) {
      Rng rng = make_rng(t);
      const auto s = reservoir_sample(h, 500, t);
      tops.push_back(build_top_tree(s.rows, Task::classification(3), BuildParams::top_tree(50, 1.0), rng));
    }
    auto store = make_memory_store();
    const std::uint32_t n_b = 3;
    const auto m = distribute(tops, h, *store, n_b, 11, true, 2);
    for (std::uint32_t t = 0; t < 3; ++t) {
      CHECK(m.rows_for(t) == 5000);
      std::multiset<float> seen;
      for (const auto& rec : m.buckets) {
        if (rec.id.top_tree != t) continue;
        const Bucket bucket = store->read(rec.id);
        CHECK(bucket.size() == rec.rows);
        for (std::size_t i = 0; i < bucket.size(); ++i) {
          CHECK(predict_leaf_index(tops[t], bucket.rows.row(i)) == rec.id.leaf);
          seen.insert(bucket.rows.at(i, 0) * 3 + bucket.rows.at(i, 1));
        }
        for (std::uint32_t j = 0; j < n_b; ++j) {
          double sum = 0;
          for (std::size_t i = 0; i < bucket.size(); ++i) sum += bucket.weight(i, j);
          CHECK(std::abs(sum - double(bucket.size())) <= 4 * std::sqrt(double(bucket.size())) + 1e-9);
        }
      }
      CHECK(seen.size() == 5000);
    }
    // Same seed, different chunking, same buckets.
    auto store2 = make_memory_store();
    distribute(tops, h.with_chunk_size(1000), *store2, n_b, 11, true, 1);
    for (const auto& rec : m.buckets) {
      CHECK(store2->read(rec.id).weights == store->read(rec.id).weights);
      CHECK(store2->read(rec.id).rows.x == store->read(rec.id).rows.x);
    }
  }

  TEST_CASE("distribute: storage failure names completed buckets") {
    const Block b = testutil::random_block(4, 200, 2, 2, 1 << 20);
    const auto h = testutil::memory_handle(b, Task::classification(2));
    Rng rng = make_rng(0);
    const std::vector<TreeModel> tops{
        build_top_tree(b, Task::classification(2), BuildParams::top_tree(60, 1.0), rng)};
    REQUIRE(tops[0].n_leaves() >= 3);
    FailingStore store({0, 2});
    try {
      distribute(tops, h, store, 1, 0);
      FAIL("expected a storage error");
    } catch (const StorageError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("disk full") != std::string::npos);
      CHECK(msg.find("(0,0)") != std::string::npos);
      CHECK(msg.find("(0,1)") != std::string::npos);
    }
  }

  TEST_CASE("degenerate woody equals direct CART on the training set") {
    for (int t = 0; t < 8; ++t) {
      const std::size_t n = 50 + 40 * t;
      const std::uint32_t d = 1 + t % 4;
      const Block b = testutil::random_block(100 + t, n, d, 2 + t % 3, 4 + t);
      const Task task = Task::classification(2 + t % 3);
      const auto h = testutil::memory_handle(b, task, 37);
      ForestConfig c = small_config();
      c.lambda = 0.0;
      c.leaf_bucket_size = 2;
      c.subset_size = n;
      c.bootstrap = false;
      c.bottom.gain.features_per_node = d;
      const ForestModel woody = build_big_forest(h, c);
      BuildParams p;
      p.gain.features_per_node = d;
      Rng rng = make_rng(0);
      const TreeModel direct = build_tree(b, {}, task, p, rng);
      const auto pred = predict_forest(woody, b);
      for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == predict(direct, b.row(i)));
    }
  }

  TEST_CASE("forest shape: 6 top trees with 4 bottom trees per leaf") {
    const auto h = testutil::memory_handle(testutil::random_block(5, 3000, 4, 3, 100), Task::classification(3), 500);
    ForestConfig c = small_config();
    c.n_top = 6;
    c.n_b = 4;
    c.subset_size = 600;
    c.leaf_bucket_size = 300;
    const ForestModel m = build_big_forest(h, c);
    CHECK(m.total_trees() == 24);
    CHECK(m.units.size() == 6);
    for (const auto& u : m.units) {
      CHECK(u.bottoms.size() == u.top.n_leaves());
      for (const auto& list : u.bottoms) CHECK(list.size() == 4);
    }
    CHECK_NOTHROW(m.validate());
  }

  TEST_CASE("a class missing from every subset is still predicted") {
    // Class 2 lives in a tight, separated cluster of 0.4% of the rows.
    Block b(2);
    Rng data = make_rng(6);
    for (int i = 0; i < 5000; ++i) {
      if (i % 250 == 0) {
        b.push_row(std::vector<float>{5.0f + float(uniform01(data)) * 0.01f, 5.0f}, 2);
      } else {
        const float x = float(uniform01(data)), y = float(uniform01(data));
        b.push_row(std::vector<float>{x, y}, x < 0.5f ? 0 : 1);
      }
    }
    const auto h = testutil::memory_handle(b, Task::classification(3), 1000);
    ForestConfig c = small_config();
    c.n_top = 2;
    c.n_b = 3;
    c.subset_size = 50;
    c.leaf_bucket_size = 500;
    std::size_t found = 0;
    for (std::uint64_t seed = 0; seed < 20 && found < 3; ++seed) {
      // Pick seeds whose top-tree subsets contain no class-2 row.
      std::vector<std::uint64_t> seeds{derive_seed(seed, {0x5b5e7, 0}), derive_seed(seed, {0x5b5e7, 1})};
      const auto subsets = reservoir_sample_many(h, 50, seeds);
      bool absent = true;
      for (const auto& s : subsets)
        for (double y : s.rows.y) absent = absent && y != 2;
      if (!absent) continue;
      ++found;
      c.seed = seed;
      const ForestModel m = build_big_forest(h, c);
      CHECK(predict_forest(m, std::vector<float>{5.004f, 5.0f}) == 2.0);
    }
    CHECK(found >= 1);
  }

  TEST_CASE("vote_argmax and combiner") {
    CHECK(vote_argmax(std::vector<std::uint64_t>{0, 5, 0}) == 1);
    CHECK(vote_argmax(std::vector<std::uint64_t>{3, 3}) == 0);
    CHECK(vote_argmax(std::vector<std::uint64_t>{1, 2, 2}) == 1);
    CHECK_THROWS_AS(vote_argmax({}), DomainError);

    auto leaf_unit = [](const Task& task, std::vector<LabelSummary> labels) {
      TopUnit u;
      u.top = make_single_leaf_top_tree(task, 2);
      u.bottoms.resize(1);
      for (const auto& l : labels) u.bottoms[0].push_back(make_leaf_tree(task, 2, l));
      return u;
    };
    ForestModel reg;
    reg.task = Task::regression();
    reg.n_features = 2;
    reg.combiner = Combiner::mean;
    for (double v : {1.0, 2.0, 3.0}) {
      const std::vector<double> one{v};
      reg.units.push_back(leaf_unit(reg.task, {LabelSummary::from_labels(one)}));
    }
    CHECK(predict_forest(reg, std::vector<float>{0, 0}) == doctest::Approx(2.0));

    ForestModel cls;
    cls.task = Task::classification(4);
    cls.n_features = 2;
    cls.combiner = Combiner::vote;
    cls.units.push_back(leaf_unit(cls.task, {LabelSummary::histogram({0, 0, 0, 1}), LabelSummary::histogram({0, 0, 0, 9})}));
    CHECK(predict_forest(cls, std::vector<float>{0, 0}) == 3.0);
    cls.units.push_back(leaf_unit(cls.task, {LabelSummary::histogram({0, 5, 0, 0})}));
    CHECK(predict_forest(cls, std::vector<float>{0, 0}) == 3.0);  // 2 vs 1
    CHECK_THROWS_AS(predict_forest(cls, std::vector<float>{0, 0, 0}), DomainError);
  }

  TEST_CASE("subsets baseline: each tree sees min(size, n) rows") {
    const auto h = testutil::memory_handle(testutil::random_block(7, 900, 3, 2, 1 << 20), Task::classification(2), 100);
    ForestConfig c = small_config();
    c.n_top = 5;
    c.baseline_subset_size = 250;
    const ForestModel m = build_subsets_forest(h, c);
    CHECK(m.total_trees() == 5);
    for (const auto& u : m.units) CHECK(rows_seen(u.bottoms[0][0]) == 250);
    c.baseline_subset_size = 5000;
    const ForestModel all = build_subsets_forest(h, c);
    for (const auto& u : all.units) CHECK(rows_seen(u.bottoms[0][0]) == 900);
  }

  TEST_CASE("standard scheme: bootstrap sample of size n per tree") {
    const auto h = testutil::memory_handle(testutil::random_block(8, 700, 3, 2, 1 << 20), Task::classification(2), 100);
    ForestConfig c = small_config();
    c.n_top = 3;
    const ForestModel m = build_standard_forest(h, c);
    CHECK(m.total_trees() == 3);
    for (const auto& u : m.units) CHECK(rows_seen(u.bottoms[0][0]) == 700);
  }

  TEST_CASE("regression forests") {
    const auto h = testutil::memory_handle(testutil::random_regression(9, 2000, 3), Task::regression(), 300);
    ForestConfig c = small_config();
    c.n_top = 2;
    c.n_b = 2;
    c.subset_size = 400;
    c.leaf_bucket_size = 200;
    for (Scheme s : {Scheme::woody, Scheme::subsets, Scheme::standard}) {
      const ForestModel m = train_forest(s, h, c);
      CHECK(m.combiner == Combiner::mean);
      const Block test = testutil::random_regression(10, 500, 3);
      const auto pred = predict_forest(m, test);
      double mse = 0;
      for (std::size_t i = 0; i < test.size(); ++i) mse += (pred[i] - test.y[i]) * (pred[i] - test.y[i]);
      CHECK(mse / test.size() < 0.05);
    }
  }

  TEST_CASE("parallel prediction equals the serial reference") {
    const auto h = testutil::memory_handle(testutil::random_block(11, 2000, 4, 3, 20), Task::classification(3), 300);
    ForestConfig c = small_config();
    c.n_top = 3;
    c.n_b = 2;
    c.subset_size = 300;
    c.leaf_bucket_size = 200;
    const ForestModel m = build_big_forest(h, c);
    const Block probe = testutil::random_block(12, 1500, 4, 3, 20);
    CHECK(predict_forest(m, probe, 3) == predict_forest_serial(m, probe));
    CHECK(predict_dataset(m, testutil::memory_handle(probe, Task::classification(3), 77), 2) ==
          predict_forest_serial(m, probe));
  }

  TEST_CASE("determinism across runs, stores, job counts and chunk sizes") {
    TempDir dir;
    const Block b = testutil::random_block(13, 3000, 4, 3, 50);
    write_dataset(dir / "d.cnpy", b, Task::classification(3));
    ForestConfig c = small_config();
    c.n_top = 3;
    c.n_b = 2;
    c.subset_size = 500;
    c.leaf_bucket_size = 250;
    const auto h = DatasetHandle::open_binary(dir / "d.cnpy", 400);
    const auto reference = serialize_forest(build_big_forest(h, c));
    CHECK(serialize_forest(build_big_forest(h, c)) == reference);
    c.store = StoreKind::disk;
    c.scratch_dir = dir / "scratch";
    CHECK(serialize_forest(build_big_forest(h, c)) == reference);
    c.jobs = 1;
    CHECK(serialize_forest(build_big_forest(h.with_chunk_size(97), c)) == reference);
    CHECK(serialize_forest(build_big_forest(testutil::memory_handle(b, Task::classification(3), 1000), c)) == reference);
    // Scratch directories are removed afterwards.
    CHECK(std::filesystem::is_empty(dir / "scratch"));
    c.seed = 43;
    CHECK(serialize_forest(build_big_forest(h, c)) != reference);
  }

  TEST_CASE("memory contract on a small disk run") {
    TempDir dir;
    const SyntheticSpec spec{SyntheticKind::gaussian_mixture, 20000, 4, 3, 0.0, 5};
    generate_to_file(spec, dir / "d.cnpy");
    const std::size_t C = 1000;
    const auto h = DatasetHandle::open_binary(dir / "d.cnpy", C);
    ForestConfig c = small_config();
    c.jobs = 1;
    c.n_top = 2;
    c.n_b = 2;
    c.subset_size = 2000;
    c.leaf_bucket_size = 1000;
    c.store = StoreKind::disk;
    c.scratch_dir = dir / "scratch";
    c.write_buffer_rows = 64;
    TrainingReport r;
    build_big_forest(h, c, &r);
    CHECK(r.write_buffer_budget > 0);
    CHECK(r.peak_resident_phase12 <= static_cast<std::int64_t>(2 * 2000 + C + r.write_buffer_budget));
    CHECK(r.peak_resident_phase3 <= static_cast<std::int64_t>(r.max_bucket_rows + C));
    CHECK(r.peak_resident_phase3 >= static_cast<std::int64_t>(r.max_bucket_rows));
    CHECK(r.sample_top_seconds > 0);
    CHECK(r.distribute_seconds > 0);
    CHECK(r.bottom_seconds > 0);
    CHECK(r.sample_top_seconds + r.distribute_seconds + r.bottom_seconds <= r.total_seconds);
  }

  TEST_CASE("oversized buckets are re-split below the hard cap") {
    // Tiny top-tree subsets estimate the partition poorly; with a cap of
    // 1.5 M the fallback has to split several buckets.
    const Block b = testutil::random_block(14, 6000, 3, 2, 1 << 20);
    const auto h = testutil::memory_handle(b, Task::classification(2), 500);
    ForestConfig c = small_config();
    c.subset_size = 30;
    c.leaf_bucket_size = 200;
    c.hard_cap_multiplier = 1.5;
    for (StoreKind kind : {StoreKind::memory, StoreKind::disk}) {
      TempDir dir;
      c.store = kind;
      c.scratch_dir = dir.path();
      TrainingReport r;
      const ForestModel m = build_big_forest(h, c, &r);
      CHECK(r.n_resplits > 0);
      CHECK(static_cast<double>(r.max_bucket_rows) <= 1.5 * 200);
      std::map<std::uint64_t, std::uint64_t> sizes;
      for (std::size_t i = 0; i < b.size(); ++i) ++sizes[predict_leaf_index(m.units[0].top, b.row(i))];
      CHECK(sizes.size() == m.units[0].top.n_leaves());
      CHECK(r.n_buckets == m.units[0].top.n_leaves());
      std::uint64_t hi = 0;
      for (const auto& [leaf, s] : sizes) hi = std::max(hi, s);
      CHECK(hi == r.max_bucket_rows);
    }
  }

  TEST_CASE("an unsplittable oversized bucket is kept whole") {
    Block b(2);
    for (int i = 0; i < 3000; ++i) b.push_row(std::vector<float>{1.0f, 2.0f}, i % 2);
    const auto h = testutil::memory_handle(b, Task::classification(2), 500);
    ForestConfig c = small_config();
    c.subset_size = 100;
    c.leaf_bucket_size = 50;
    TrainingReport r;
    const ForestModel m = build_big_forest(h, c, &r);
    CHECK(m.units[0].top.n_leaves() == 1);
    CHECK(r.max_bucket_rows == 3000);
    CHECK(r.n_resplits == 0);
  }
}
