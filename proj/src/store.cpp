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

#include "canopy/store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "canopy/error.hpp"

namespace canopy {

namespace {

std::string describe(BucketId id) {
  return "bucket (top tree " + std::to_string(id.top_tree) + ", leaf " + std::to_string(id.leaf) + ")";
}

void check_weights(std::size_t rows, std::span<const std::uint32_t> weights, std::uint32_t n_b) {
  if (weights.size() != rows * n_b) throw DomainError("weights block must hold n_b entries per row");
}

// ---------------------------------------------------------------------------

class MemoryStore;

class MemoryWriter final : public BucketWriter {
 public:
  MemoryWriter(MemoryStore& store, BucketId id, Task task, std::uint32_t d, std::uint32_t n_b)
      : store_(store), id_(id) {
    bucket_.task = task;
    bucket_.rows = Block(d);
    bucket_.n_b = n_b;
  }
  void append(const Block& rows, std::span<const std::uint32_t> weights) override {
    check_weights(rows.size(), weights, bucket_.n_b);
    bucket_.rows.x.insert(bucket_.rows.x.end(), rows.x.begin(), rows.x.end());
    bucket_.rows.y.insert(bucket_.rows.y.end(), rows.y.begin(), rows.y.end());
    bucket_.weights.insert(bucket_.weights.end(), weights.begin(), weights.end());
  }
  void append_row(std::span<const float> features, double label, std::span<const std::uint32_t> weights) override {
    check_weights(1, weights, bucket_.n_b);
    bucket_.rows.push_row(features, label);
    bucket_.weights.insert(bucket_.weights.end(), weights.begin(), weights.end());
  }
  BucketReceipt finish() override;
  std::uint64_t rows() const override { return bucket_.size(); }

 private:
  MemoryStore& store_;
  BucketId id_;
  Bucket bucket_;
};

class MemoryStore final : public ScratchStore {
 public:
  explicit MemoryStore(ResidentCounter* counter) : ScratchStore(counter) {}
  StoreKind kind() const override { return StoreKind::memory; }

  std::unique_ptr<BucketWriter> open_writer(BucketId id, Task task, std::uint32_t d, std::uint32_t n_b) override {
    if (n_b == 0) throw ConfigError("n_b must be at least 1");
    return std::make_unique<MemoryWriter>(*this, id, task, d, n_b);
  }

  Bucket read(BucketId id) const override {
    std::shared_ptr<const Bucket> stored;
    {
      std::lock_guard lock(mutex_);
      auto it = buckets_.find(id);
      if (it == buckets_.end()) throw LookupError("unknown " + describe(id));
      stored = it->second;
    }
    Bucket copy;
    copy.task = stored->task;
    copy.rows = stored->rows;
    copy.n_b = stored->n_b;
    copy.weights = stored->weights;
    copy.resident = ResidentRows(counter_, static_cast<std::int64_t>(copy.size()));
    return copy;
  }

  void for_each_chunk(BucketId id, std::size_t chunk_rows,
                      const std::function<void(const Block&, std::span<const std::uint32_t>)>& fn) const override {
    std::shared_ptr<const Bucket> stored;
    {
      std::lock_guard lock(mutex_);
      auto it = buckets_.find(id);
      if (it == buckets_.end()) throw LookupError("unknown " + describe(id));
      stored = it->second;
    }
    const std::size_t d = stored->rows.n_features;
    Block piece(static_cast<std::uint32_t>(d));
    for (std::size_t begin = 0; begin < stored->size(); begin += chunk_rows) {
      const std::size_t end = std::min(stored->size(), begin + chunk_rows);
      ResidentRows hold(counter_, static_cast<std::int64_t>(end - begin));
      piece.x.assign(stored->rows.x.begin() + static_cast<std::ptrdiff_t>(begin * d),
                     stored->rows.x.begin() + static_cast<std::ptrdiff_t>(end * d));
      piece.y.assign(stored->rows.y.begin() + static_cast<std::ptrdiff_t>(begin),
                     stored->rows.y.begin() + static_cast<std::ptrdiff_t>(end));
      fn(piece, std::span<const std::uint32_t>(stored->weights).subspan(begin * stored->n_b,
                                                                         (end - begin) * stored->n_b));
    }
  }

  bool contains(BucketId id) const override {
    std::lock_guard lock(mutex_);
    return buckets_.count(id) != 0;
  }
  void erase(BucketId id) override {
    std::lock_guard lock(mutex_);
    buckets_.erase(id);
  }
  void rename(BucketId from, BucketId to) override {
    std::lock_guard lock(mutex_);
    auto it = buckets_.find(from);
    if (it == buckets_.end()) throw LookupError("unknown " + describe(from));
    auto stored = std::move(it->second);
    buckets_.erase(it);
    buckets_[to] = std::move(stored);
  }
  std::vector<BucketId> list() const override {
    std::lock_guard lock(mutex_);
    std::vector<BucketId> ids;
    for (const auto& [id, _] : buckets_) ids.push_back(id);
    return ids;
  }

  void put(BucketId id, Bucket&& bucket) {
    auto stored = std::make_shared<Bucket>(std::move(bucket));
    std::lock_guard lock(mutex_);
    buckets_[id] = std::move(stored);
  }

 private:
  mutable std::mutex mutex_;
  std::map<BucketId, std::shared_ptr<const Bucket>> buckets_;
};

BucketReceipt MemoryWriter::finish() {
  BucketReceipt receipt{id_, bucket_.size(), "memory"};
  store_.put(id_, std::move(bucket_));
  return receipt;
}

// ---------------------------------------------------------------------------

class DiskWriter final : public BucketWriter {
 public:
  DiskWriter(std::filesystem::path path, BucketId id, Task task, std::uint32_t d, std::uint32_t n_b,
             std::size_t buffer_rows, ResidentCounter* counter)
      : path_(std::move(path)),
        weights_path_(path_.string() + ".w"),
        id_(id),
        task_(task),
        d_(d),
        n_b_(n_b),
        buffer_rows_(buffer_rows),
        buffer_(d),
        resident_(counter, 0) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot create " + path_.string());
    const auto header = encode_header({task_, 0, d_});
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::ofstream w(weights_path_, std::ios::binary | std::ios::trunc);
    if (!out || !w) throw StorageError("cannot create " + path_.string());
  }

  ~DiskWriter() override {
    if (!finished_) {
      std::error_code ec;
      std::filesystem::remove(weights_path_, ec);
    }
  }

  void append(const Block& rows, std::span<const std::uint32_t> weights) override {
    check_weights(rows.size(), weights, n_b_);
    for (std::size_t i = 0; i < rows.size(); ++i)
      append_row(rows.row(i), rows.y[i], weights.subspan(i * n_b_, n_b_));
  }

  void append_row(std::span<const float> features, double label, std::span<const std::uint32_t> weights) override {
    check_weights(1, weights, n_b_);
    buffer_.push_row(features, label);
    weights_.insert(weights_.end(), weights.begin(), weights.end());
    resident_.resize(static_cast<std::int64_t>(buffer_.size()));
    if (buffer_.size() >= buffer_rows_) flush();
  }

  BucketReceipt finish() override {
    flush();
    {
      std::ifstream w(weights_path_, std::ios::binary);
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!w || !out) throw StorageError("cannot finalize " + path_.string());
      std::vector<char> block(1 << 16);
      while (w) {
        w.read(block.data(), static_cast<std::streamsize>(block.size()));
        out.write(block.data(), w.gcount());
      }
      if (!out) throw StorageError("write failed on " + path_.string());
    }
    {
      std::fstream out(path_, std::ios::binary | std::ios::in | std::ios::out);
      const auto header = encode_header({task_, rows_, d_});
      out.seekp(0);
      out.write(header.data(), static_cast<std::streamsize>(header.size()));
      if (!out) throw StorageError("cannot patch header of " + path_.string());
    }
    std::filesystem::remove(weights_path_);
    finished_ = true;
    return {id_, rows_, path_.string()};
  }

  std::uint64_t rows() const override { return rows_; }

 private:
  void flush() {
    if (buffer_.empty()) return;
    bytes_.clear();
    encode_rows(buffer_, task_, bytes_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    std::ofstream w(weights_path_, std::ios::binary | std::ios::app);
    w.write(reinterpret_cast<const char*>(weights_.data()),
            static_cast<std::streamsize>(weights_.size() * sizeof(std::uint32_t)));
    if (!out || !w) throw StorageError("write failed on " + path_.string());
    rows_ += buffer_.size();
    buffer_.clear();
    weights_.clear();
    resident_.resize(0);
  }

  std::filesystem::path path_;
  std::filesystem::path weights_path_;
  BucketId id_;
  Task task_;
  std::uint32_t d_;
  std::uint32_t n_b_;
  std::size_t buffer_rows_;
  Block buffer_;
  std::vector<std::uint32_t> weights_;
  std::vector<char> bytes_;
  ResidentRows resident_;
  std::uint64_t rows_ = 0;
  bool finished_ = false;
};

class DiskStore final : public ScratchStore {
 public:
  DiskStore(std::filesystem::path run_dir, ResidentCounter* counter)
      : ScratchStore(counter), run_dir_(std::move(run_dir)) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir_, ec);
    if (ec || !std::filesystem::is_directory(run_dir_))
      throw StorageError("cannot create scratch directory " + run_dir_.string());
    const auto probe = run_dir_ / ".probe";
    std::ofstream out(probe);
    if (!out) throw StorageError("scratch directory " + run_dir_.string() + " is not writable");
    out.close();
    std::filesystem::remove(probe, ec);
  }
  StoreKind kind() const override { return StoreKind::disk; }

  std::unique_ptr<BucketWriter> open_writer(BucketId id, Task task, std::uint32_t d, std::uint32_t n_b) override {
    if (n_b == 0) throw ConfigError("n_b must be at least 1");
    return std::make_unique<DiskWriter>(bucket_path(run_dir_, id), id, task, d, n_b, write_buffer_rows_,
                                        counter_);
  }

  Bucket read(BucketId id) const override {
    const auto path = bucket_path(run_dir_, id);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("unknown " + describe(id));
    char head[kDatasetHeaderBytes];
    in.read(head, sizeof(head));
    const DatasetHeader h = decode_header({head, static_cast<std::size_t>(in.gcount())}, path.string());
    const std::uint64_t total = std::filesystem::file_size(path);
    const std::uint64_t payload = h.payload_bytes();
    if (total < kDatasetHeaderBytes + payload) throw TruncationError(path.string() + ": truncated bucket");
    const std::uint64_t weight_bytes = total - kDatasetHeaderBytes - payload;
    Bucket bucket;
    bucket.task = h.task;
    bucket.rows = Block(h.n_features);
    if (h.n_rows == 0) {
      bucket.n_b = 0;
      return bucket;
    }
    if (weight_bytes % (h.n_rows * 4) != 0 || weight_bytes == 0)
      throw TruncationError(path.string() + ": malformed weights block");
    bucket.n_b = static_cast<std::uint32_t>(weight_bytes / (h.n_rows * 4));
    bucket.resident = ResidentRows(counter_, static_cast<std::int64_t>(h.n_rows));

    std::vector<char> bytes(payload);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != payload)
      throw StreamError(kDatasetHeaderBytes + static_cast<std::uint64_t>(in.gcount()), "short read from " + path.string());
    bucket.rows.reserve(h.n_rows);
    decode_rows(bytes, h.n_rows, h.task, bucket.rows);
    bucket.weights.resize(h.n_rows * bucket.n_b);
    in.read(reinterpret_cast<char*>(bucket.weights.data()), static_cast<std::streamsize>(weight_bytes));
    if (static_cast<std::uint64_t>(in.gcount()) != weight_bytes)
      throw StreamError(kDatasetHeaderBytes + payload, "short read of weights from " + path.string());
    return bucket;
  }

  void for_each_chunk(BucketId id, std::size_t chunk_rows,
                      const std::function<void(const Block&, std::span<const std::uint32_t>)>& fn) const override {
    const auto path = bucket_path(run_dir_, id);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("unknown " + describe(id));
    char head[kDatasetHeaderBytes];
    in.read(head, sizeof(head));
    const DatasetHeader h = decode_header({head, static_cast<std::size_t>(in.gcount())}, path.string());
    if (h.n_rows == 0) return;
    const std::uint64_t total = std::filesystem::file_size(path);
    const std::uint64_t payload = h.payload_bytes();
    if (total < kDatasetHeaderBytes + payload) throw TruncationError(path.string() + ": truncated bucket");
    const std::uint64_t weight_bytes = total - kDatasetHeaderBytes - payload;
    if (weight_bytes % (h.n_rows * 4) != 0 || weight_bytes == 0)
      throw TruncationError(path.string() + ": malformed weights block");
    const auto n_b = static_cast<std::size_t>(weight_bytes / (h.n_rows * 4));

    Block piece(h.n_features);
    std::vector<char> bytes;
    std::vector<std::uint32_t> weights;
    for (std::uint64_t begin = 0; begin < h.n_rows; begin += chunk_rows) {
      const std::uint64_t count = std::min<std::uint64_t>(chunk_rows, h.n_rows - begin);
      ResidentRows hold(counter_, static_cast<std::int64_t>(count));
      const std::uint64_t row_offset = kDatasetHeaderBytes + begin * h.row_bytes();
      bytes.resize(count * h.row_bytes());
      in.seekg(static_cast<std::streamoff>(row_offset));
      in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw StreamError(row_offset, "short read from " + path.string());
      piece.clear();
      decode_rows(bytes, count, h.task, piece);
      const std::uint64_t weight_offset = kDatasetHeaderBytes + payload + begin * n_b * 4;
      weights.resize(count * n_b);
      in.seekg(static_cast<std::streamoff>(weight_offset));
      in.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(weights.size() * 4));
      if (static_cast<std::size_t>(in.gcount()) != weights.size() * 4)
        throw StreamError(weight_offset, "short read of weights from " + path.string());
      fn(piece, weights);
    }
  }

  bool contains(BucketId id) const override { return std::filesystem::exists(bucket_path(run_dir_, id)); }

  void erase(BucketId id) override {
    std::error_code ec;
    std::filesystem::remove(bucket_path(run_dir_, id), ec);
  }

  void rename(BucketId from, BucketId to) override {
    const auto src = bucket_path(run_dir_, from);
    if (!std::filesystem::exists(src)) throw LookupError("unknown " + describe(from));
    const auto dst = bucket_path(run_dir_, to);
    std::error_code ec;
    std::filesystem::create_directories(dst.parent_path(), ec);
    std::filesystem::rename(src, dst, ec);
    if (ec) throw StorageError("cannot move " + src.string() + " to " + dst.string() + ": " + ec.message());
  }

  std::vector<BucketId> list() const override {
    std::vector<BucketId> ids;
    for (const auto& dir : std::filesystem::directory_iterator(run_dir_)) {
      const std::string name = dir.path().filename().string();
      if (!dir.is_directory() || name.rfind("toptree-", 0) != 0) continue;
      const auto top = static_cast<std::uint32_t>(std::stoul(name.substr(8)));
      for (const auto& file : std::filesystem::directory_iterator(dir.path())) {
        const std::string f = file.path().filename().string();
        if (f.rfind("bucket-", 0) != 0 || file.path().extension() != ".bin") continue;
        ids.push_back({top, std::stoull(f.substr(7, f.size() - 7 - 4))});
      }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::filesystem::path run_dir_;
};

}  // namespace

std::filesystem::path bucket_path(const std::filesystem::path& run_dir, BucketId id) {
  return run_dir / ("toptree-" + std::to_string(id.top_tree)) / ("bucket-" + std::to_string(id.leaf) + ".bin");
}

std::unique_ptr<ScratchStore> make_memory_store(ResidentCounter* counter) {
  return std::make_unique<MemoryStore>(counter);
}

std::unique_ptr<ScratchStore> make_disk_store(const std::filesystem::path& root, const std::string& run_id,
                                              ResidentCounter* counter) {
  return std::make_unique<DiskStore>(root / run_id, counter);
}

BucketReceipt write_bucket(ScratchStore& store, BucketId id, Task task, const Block& rows,
                           std::span<const std::uint32_t> weights, std::uint32_t n_b) {
  auto writer = store.open_writer(id, task, rows.n_features, n_b);
  writer->append(rows, weights);
  return writer->finish();
}

Bucket read_bucket(const ScratchStore& store, BucketId id) { return store.read(id); }

}  // namespace canopy
