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

// Scratch storage for leaf buckets. A bucket holds the training rows routed
// to one top-tree leaf plus n_b bootstrap multiplicities per row. Buckets
// live either in memory or as files under
//   <root>/<run-id>/toptree-<t>/bucket-<leaf>.bin
// using the dataset binary layout followed by a weights block.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "canopy/data.hpp"

namespace canopy {

enum class StoreKind { memory, disk };

struct BucketId {
  std::uint32_t top_tree = 0;
  std::uint64_t leaf = 0;
  auto operator<=>(const BucketId&) const = default;
};

struct Bucket {
  Task task;
  Block rows;
  std::uint32_t n_b = 1;
  std::vector<std::uint32_t> weights;  ///< row-major, n_b entries per row
  ResidentRows resident;

  std::uint32_t weight(std::size_t row, std::uint32_t tree) const noexcept { return weights[row * n_b + tree]; }
  std::size_t size() const noexcept { return rows.size(); }
};

struct BucketReceipt {
  BucketId id;
  std::uint64_t rows = 0;
  std::string location;
};

/// Append-only writer for one bucket. Single writer per bucket id.
class BucketWriter {
 public:
  virtual ~BucketWriter() = default;
  /// `weights` holds n_b entries per appended row.
  virtual void append(const Block& rows, std::span<const std::uint32_t> weights) = 0;
  /// Appends a single row.
  virtual void append_row(std::span<const float> features, double label, std::span<const std::uint32_t> weights) = 0;
  virtual BucketReceipt finish() = 0;
  virtual std::uint64_t rows() const = 0;
};

class ScratchStore {
 public:
  virtual ~ScratchStore() = default;
  virtual StoreKind kind() const = 0;

  /// Rows buffered per bucket writer before a flush (disk store).
  void set_write_buffer_rows(std::size_t rows) { write_buffer_rows_ = rows == 0 ? 1 : rows; }
  std::size_t write_buffer_rows() const noexcept { return write_buffer_rows_; }

  virtual std::unique_ptr<BucketWriter> open_writer(BucketId id, Task task, std::uint32_t n_features,
                                                    std::uint32_t n_b) = 0;
  virtual Bucket read(BucketId id) const = 0;
  /// Streams a stored bucket in pieces of at most `chunk_rows` rows; only
  /// one piece is resident at a time.
  virtual void for_each_chunk(
      BucketId id, std::size_t chunk_rows,
      const std::function<void(const Block& rows, std::span<const std::uint32_t> weights)>& fn) const = 0;
  virtual bool contains(BucketId id) const = 0;
  virtual void erase(BucketId id) = 0;
  /// Moves a finished bucket to a new id, replacing any bucket there.
  virtual void rename(BucketId from, BucketId to) = 0;
  virtual std::vector<BucketId> list() const = 0;

  ResidentCounter* counter() const noexcept { return counter_; }

 protected:
  explicit ScratchStore(ResidentCounter* counter) : counter_(counter) {}
  ResidentCounter* counter_;
  std::size_t write_buffer_rows_ = 1024;
};

/// Buckets held in process memory. Stored buckets are not charged to the
/// resident counter; loaded copies are.
std::unique_ptr<ScratchStore> make_memory_store(ResidentCounter* counter = nullptr);

/// Buckets stored as files below root/run_id. Reopening an existing run
/// directory sees the buckets written earlier.
std::unique_ptr<ScratchStore> make_disk_store(const std::filesystem::path& root, const std::string& run_id,
                                              ResidentCounter* counter = nullptr);

std::filesystem::path bucket_path(const std::filesystem::path& run_dir, BucketId id);

BucketReceipt write_bucket(ScratchStore& store, BucketId id, Task task, const Block& rows,
                           std::span<const std::uint32_t> weights, std::uint32_t n_b);
Bucket read_bucket(const ScratchStore& store, BucketId id);

}  // namespace canopy
