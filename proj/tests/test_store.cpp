#include <doctest.h>

#include <sys/stat.h>

#include "canopy/error.hpp"
#include "canopy/store.hpp"
#include "test_util.hpp"

using namespace canopy;
using testutil::TempDir;

namespace {

std::vector<std::uint32_t> weights_for(std::size_t rows, std::uint32_t n_b, std::uint32_t salt) {
  std::vector<std::uint32_t> w(rows * n_b);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<std::uint32_t>(mix64(i + salt) % 5);
  return w;
}

void round_trip(ScratchStore& store) {
  const Block rows = testutil::random_block(1, 1000, 4, 3, 1 << 16);
  const auto w = weights_for(1000, 3, 0);
  const auto receipt = write_bucket(store, {0, 7}, Task::classification(3), rows, w, 3);
  CHECK(receipt.rows == 1000);
  const Bucket b = read_bucket(store, {0, 7});
  CHECK(b.n_b == 3);
  CHECK(b.rows.x == rows.x);
  CHECK(b.rows.y == rows.y);
  CHECK(b.weights == w);
  CHECK(b.weight(5, 2) == w[5 * 3 + 2]);
}

void isolation(ScratchStore& store) {
  const Block a = testutil::random_block(2, 300, 2, 2);
  const Block b = testutil::random_block(3, 200, 2, 2);
  auto wa = store.open_writer({1, 0}, Task::classification(2), 2, 1);
  auto wb = store.open_writer({1, 1}, Task::classification(2), 2, 1);
  const std::vector<std::uint32_t> one{1};
  for (std::size_t i = 0; i < 300; ++i) {
    wa->append_row(a.row(i), a.y[i], one);
    if (i < 200) wb->append_row(b.row(i), b.y[i], one);
  }
  CHECK(wa->finish().rows == 300);
  CHECK(wb->finish().rows == 200);
  CHECK(store.read({1, 0}).rows.x == a.x);
  CHECK(store.read({1, 1}).rows.x == b.x);
  CHECK(store.list() == std::vector<BucketId>{{1, 0}, {1, 1}});
}

void lookup_and_rename(ScratchStore& store) {
  CHECK_THROWS_AS(store.read({9, 9}), LookupError);
  const Block a = testutil::random_block(4, 10, 2, 2);
  write_bucket(store, {0, 1}, Task::classification(2), a, weights_for(10, 1, 3), 1);
  CHECK(store.contains({0, 1}));
  store.rename({0, 1}, {0, 5});
  CHECK_FALSE(store.contains({0, 1}));
  CHECK(store.read({0, 5}).rows.x == a.x);
  store.erase({0, 5});
  CHECK_FALSE(store.contains({0, 5}));
  CHECK_THROWS_AS(store.rename({0, 1}, {0, 2}), LookupError);
}

void empty_and_chunked(ScratchStore& store) {
  auto w = store.open_writer({2, 0}, Task::regression(), 3, 2);
  w->finish();
  const Bucket e = store.read({2, 0});
  CHECK(e.size() == 0);
  CHECK(e.task == Task::regression());

  const Block rows = testutil::random_regression(5, 105, 3);
  const auto weights = weights_for(105, 2, 9);
  write_bucket(store, {2, 1}, Task::regression(), rows, weights, 2);
  std::vector<float> x;
  std::vector<std::uint32_t> ws;
  std::size_t pieces = 0;
  store.for_each_chunk({2, 1}, 20, [&](const Block& b, std::span<const std::uint32_t> wt) {
    CHECK(b.size() <= 20);
    CHECK(wt.size() == b.size() * 2);
    x.insert(x.end(), b.x.begin(), b.x.end());
    ws.insert(ws.end(), wt.begin(), wt.end());
    ++pieces;
  });
  CHECK(pieces == 6);
  CHECK(x == rows.x);
  CHECK(ws == weights);
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("memory store") {
    SUBCASE("round trip") { round_trip(*make_memory_store()); }
    SUBCASE("isolation") { isolation(*make_memory_store()); }
    SUBCASE("lookup and rename") { lookup_and_rename(*make_memory_store()); }
    SUBCASE("empty and chunked reads") { empty_and_chunked(*make_memory_store()); }
  }

  TEST_CASE("disk store") {
    TempDir dir;
    SUBCASE("round trip") { round_trip(*make_disk_store(dir.path(), "r1")); }
    SUBCASE("isolation") { isolation(*make_disk_store(dir.path(), "r2")); }
    SUBCASE("lookup and rename") { lookup_and_rename(*make_disk_store(dir.path(), "r3")); }
    SUBCASE("empty and chunked reads") { empty_and_chunked(*make_disk_store(dir.path(), "r4")); }
  }

  TEST_CASE("disk layout and reopening a run directory") {
    TempDir dir;
    const Block rows = testutil::random_block(6, 50, 2, 2);
    {
      auto store = make_disk_store(dir.path(), "run");
      write_bucket(*store, {3, 12}, Task::classification(2), rows, weights_for(50, 1, 1), 1);
    }
    CHECK(std::filesystem::exists(dir.path() / "run" / "toptree-3" / "bucket-12.bin"));
    CHECK(bucket_path(dir.path() / "run", {3, 12}) == dir.path() / "run" / "toptree-3" / "bucket-12.bin");
    auto again = make_disk_store(dir.path(), "run");
    CHECK(again->read({3, 12}).rows.x == rows.x);
  }

  TEST_CASE("disk bucket file is the dataset format plus a weights block") {
    TempDir dir;
    auto store = make_disk_store(dir.path(), "run");
    const Block rows = testutil::random_block(7, 20, 3, 2);
    write_bucket(*store, {0, 0}, Task::classification(2), rows, weights_for(20, 4, 2), 4);
    const auto path = bucket_path(dir.path() / "run", {0, 0});
    const auto header = read_header(path);
    CHECK(header.n_rows == 20);
    CHECK(header.n_features == 3);
    CHECK(std::filesystem::file_size(path) == kDatasetHeaderBytes + 20 * (3 * 4 + 4) + 20 * 4 * 4);
  }

  TEST_CASE("unwritable scratch root is a storage error") {
    TempDir dir;
    std::filesystem::create_directories(dir / "ro");
    ::chmod((dir / "ro").c_str(), 0500);
    if (::geteuid() != 0) {
      CHECK_THROWS_AS(make_disk_store(dir / "ro", "run"), StorageError);
    }
    testutil::write_text(dir / "file", "x");
    CHECK_THROWS_AS(make_disk_store(dir / "file", "run"), StorageError);
    ::chmod((dir / "ro").c_str(), 0700);
  }

  TEST_CASE("disk writer charges only its buffer to the counter") {
    TempDir dir;
    ResidentCounter counter;
    auto store = make_disk_store(dir.path(), "run", &counter);
    store->set_write_buffer_rows(16);
    auto w = store->open_writer({0, 0}, Task::classification(2), 2, 1);
    const Block rows = testutil::random_block(8, 100, 2, 2);
    const std::vector<std::uint32_t> one{1};
    for (std::size_t i = 0; i < 100; ++i) {
      w->append_row(rows.row(i), rows.y[i], one);
      CHECK(counter.current() <= 16);
    }
    w->finish();
    CHECK(counter.current() == 0);
    CHECK(counter.peak() <= 16);
    {
      const Bucket b = store->read({0, 0});
      CHECK(counter.current() == 100);
    }
    CHECK(counter.current() == 0);
  }
}
