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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace canopy {

enum class TaskKind : std::uint8_t { classification = 0, regression = 1 };

struct Task {
  TaskKind kind = TaskKind::classification;
  /// Class count k; 0 for regression. For csv ingestion a classification
  /// task with k = 0 means "infer k from the labels".
  std::uint32_t n_classes = 0;

  static Task classification(std::uint32_t k) { return {TaskKind::classification, k}; }
  static Task regression() { return {TaskKind::regression, 0}; }
  bool is_classification() const noexcept { return kind == TaskKind::classification; }
  bool operator==(const Task&) const = default;
};

/// Row-major feature matrix plus one label per row. Class labels are kept
/// as exact integers in the double label slot.
struct Block {
  std::uint32_t n_features = 0;
  std::vector<float> x;
  std::vector<double> y;

  Block() = default;
  explicit Block(std::uint32_t d) : n_features(d) {}

  std::size_t size() const noexcept { return y.size(); }
  bool empty() const noexcept { return y.empty(); }
  std::span<const float> row(std::size_t i) const noexcept {
    return {x.data() + i * n_features, n_features};
  }
  std::span<float> row(std::size_t i) noexcept { return {x.data() + i * n_features, n_features}; }
  float at(std::size_t i, std::uint32_t f) const noexcept { return x[i * n_features + f]; }

  void push_row(std::span<const float> features, double label) {
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }
  void reserve(std::size_t rows) {
    x.reserve(rows * n_features);
    y.reserve(rows);
  }
  void clear() noexcept {
    x.clear();
    y.clear();
  }
};

/// Tracks how many training rows are currently held in working memory and
/// the high-water mark. Shared by chunk streams, reservoirs, bucket write
/// buffers and loaded buckets.
class ResidentCounter {
 public:
  void add(std::int64_t rows) noexcept {
    const std::int64_t now = current_.fetch_add(rows) + rows;
    std::int64_t seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
  }
  void release(std::int64_t rows) noexcept { current_.fetch_sub(rows); }
  std::int64_t current() const noexcept { return current_.load(); }
  std::int64_t peak() const noexcept { return peak_.load(); }
  void reset_peak() noexcept { peak_.store(current_.load()); }

 private:
  std::atomic<std::int64_t> current_{0};
  std::atomic<std::int64_t> peak_{0};
};

/// Scoped registration of resident rows; `resize` adjusts the amount held.
class ResidentRows {
 public:
  ResidentRows() = default;
  ResidentRows(ResidentCounter* counter, std::int64_t rows) : counter_(counter) { resize(rows); }
  ResidentRows(const ResidentRows&) = delete;
  ResidentRows& operator=(const ResidentRows&) = delete;
  ResidentRows(ResidentRows&& o) noexcept : counter_(o.counter_), rows_(o.rows_) { o.rows_ = 0; }
  ResidentRows& operator=(ResidentRows&& o) noexcept {
    if (this != &o) {
      resize(0);
      counter_ = o.counter_;
      rows_ = o.rows_;
      o.rows_ = 0;
    }
    return *this;
  }
  ~ResidentRows() { resize(0); }

  void resize(std::int64_t rows) noexcept {
    if (counter_ != nullptr && rows != rows_) {
      if (rows > rows_)
        counter_->add(rows - rows_);
      else
        counter_->release(rows_ - rows);
    }
    rows_ = rows;
  }
  std::int64_t rows() const noexcept { return rows_; }

 private:
  ResidentCounter* counter_ = nullptr;
  std::int64_t rows_ = 0;
};

// ---------------------------------------------------------------------------
// Binary dataset format (little-endian):
//   "CNPY" | version u16 | task u8 | n_rows u64 | n_features u32 | k u32
//   then per row: n_features x f32, label (u32 classification / f64 regression)
// Bucket files append a weights block of n_b x u32 per row.

inline constexpr char kDatasetMagic[4] = {'C', 'N', 'P', 'Y'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 2 + 1 + 8 + 4 + 4;

struct DatasetHeader {
  Task task;
  std::uint64_t n_rows = 0;
  std::uint32_t n_features = 0;

  std::size_t label_bytes() const noexcept { return task.is_classification() ? 4 : 8; }
  std::size_t row_bytes() const noexcept { return std::size_t{n_features} * 4 + label_bytes(); }
  std::uint64_t payload_bytes() const noexcept { return n_rows * row_bytes(); }
};

std::vector<char> encode_header(const DatasetHeader& h);
/// Parses and validates a header; throws FormatError-like data errors.
DatasetHeader decode_header(std::span<const char> bytes, const std::string& source);
DatasetHeader read_header(const std::filesystem::path& path);

/// Streaming writer for the binary format. Rows are appended in chunks; the
/// header is patched with the final row count (and class count) on finish.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, Task task, std::uint32_t n_features);
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;
  ~DatasetWriter();

  void append(const Block& rows);
  /// Overrides the class count stored in the header (used when inferred).
  void set_n_classes(std::uint32_t k) { task_.n_classes = k; }
  DatasetHeader finish();
  std::uint64_t rows_written() const noexcept { return n_rows_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  Task task_;
  std::uint32_t n_features_;
  std::uint64_t n_rows_ = 0;
  bool finished_ = false;
  std::vector<char> scratch_;
};

/// Appends the binary encoding of `rows` (without header) to `out`.
void encode_rows(const Block& rows, Task task, std::vector<char>& out);
/// Decodes `count` rows from `bytes` into `out` (appending).
void decode_rows(std::span<const char> bytes, std::size_t count, Task task, Block& out);

// ---------------------------------------------------------------------------

enum class Format { csv, binary };

struct Chunk {
  std::uint64_t first_row = 0;
  Block rows;
};

class DatasetHandle;

/// Sequential chunk reader. Holds at most one chunk; `next` replaces it.
class ChunkStream {
 public:
  ChunkStream(const DatasetHandle& handle, ResidentCounter* counter);
  ChunkStream(ChunkStream&&) noexcept;
  ChunkStream& operator=(ChunkStream&&) noexcept;
  ~ChunkStream();

  /// Loads the next chunk into `chunk`; false once the dataset is exhausted.
  bool next(Chunk& chunk);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Read-only view of a dataset, on disk or in memory, optionally restricted
/// to a row range. Cheap to copy.
class DatasetHandle {
 public:
  static DatasetHandle in_memory(std::shared_ptr<const Block> rows, Task task, std::size_t chunk_size);
  static DatasetHandle open_binary(const std::filesystem::path& path, std::size_t chunk_size);

  std::uint64_t n_rows() const noexcept { return end_ - begin_; }
  std::uint32_t n_features() const noexcept { return n_features_; }
  const Task& task() const noexcept { return task_; }
  std::size_t chunk_size() const noexcept { return chunk_size_; }
  bool on_disk() const noexcept { return memory_ == nullptr; }
  const std::filesystem::path& path() const noexcept { return path_; }

  DatasetHandle with_chunk_size(std::size_t chunk_size) const;
  /// Rows [begin, end) of this view.
  DatasetHandle slice(std::uint64_t begin, std::uint64_t end) const;

  ChunkStream chunks(ResidentCounter* counter = nullptr) const { return ChunkStream(*this, counter); }
  /// Loads the whole view into memory.
  Block materialize() const;

 private:
  friend class ChunkStream;
  std::filesystem::path path_;
  std::shared_ptr<const Block> memory_;
  Task task_;
  std::uint32_t n_features_ = 0;
  std::uint64_t begin_ = 0;
  std::uint64_t end_ = 0;
  std::size_t chunk_size_ = 1;
};

inline constexpr std::size_t kDefaultChunkSize = 100000;

/// Converts a csv file (numeric columns, label last, optional header line)
/// to the binary format. For classification with task.n_classes == 0 the
/// class count is inferred as max label + 1. Rejects missing values.
DatasetHeader ingest_csv(const std::filesystem::path& csv_path, const std::filesystem::path& out_path,
                         Task task);

/// Opens a dataset file. A csv file is converted once to `<path>.cnpy` and
/// the handle reads that binary file; the declared task must match a binary
/// file's header (a zero class count accepts any).
DatasetHandle open_dataset(const std::filesystem::path& path, Format format, Task task,
                           std::size_t chunk_size = kDefaultChunkSize);

/// Writes a whole in-memory block as a binary dataset.
void write_dataset(const std::filesystem::path& path, const Block& rows, Task task);

// ---------------------------------------------------------------------------

struct RandomSubset {
  Block rows;
  std::vector<std::uint64_t> row_ids;  ///< positions within the handle's view
  std::size_t requested_size = 0;
  std::uint64_t seed = 0;
  ResidentRows resident;  ///< keeps the sampled rows on the resident counter
};

/// Uniform sample without replacement of min(R, n_rows) rows, in one pass.
RandomSubset reservoir_sample(const DatasetHandle& handle, std::size_t R, std::uint64_t seed,
                              ResidentCounter* counter = nullptr);

/// Draws one independent subset per seed in a single shared pass.
std::vector<RandomSubset> reservoir_sample_many(const DatasetHandle& handle, std::size_t R,
                                                std::span<const std::uint64_t> seeds,
                                                ResidentCounter* counter = nullptr);

}  // namespace canopy
