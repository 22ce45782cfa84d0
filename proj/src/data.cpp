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

#include "canopy/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include "canopy/error.hpp"
#include "canopy/random.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace canopy {

namespace {

template <typename T>
void put(std::vector<char>& out, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

double checked_class_label(std::uint64_t row, double label, std::uint32_t k) {
  if (!(label >= 0.0) || label != std::floor(label) ||
      label > static_cast<double>(std::numeric_limits<std::uint32_t>::max() - 1)) {
    throw SchemaError("row " + std::to_string(row) + ": class label is not a non-negative integer");
  }
  if (k != 0 && label >= k) {
    throw SchemaError("row " + std::to_string(row) + ": class label " + std::to_string(label) +
                      " outside [0, " + std::to_string(k) + ")");
  }
  return label;
}

}  // namespace

std::vector<char> encode_header(const DatasetHeader& h) {
  std::vector<char> out;
  out.reserve(kDatasetHeaderBytes);
  out.insert(out.end(), kDatasetMagic, kDatasetMagic + 4);
  put<std::uint16_t>(out, kDatasetVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(h.task.kind));
  put<std::uint64_t>(out, h.n_rows);
  put<std::uint32_t>(out, h.n_features);
  put<std::uint32_t>(out, h.task.is_classification() ? h.task.n_classes : 0);
  return out;
}

DatasetHeader decode_header(std::span<const char> bytes, const std::string& source) {
  if (bytes.size() < kDatasetHeaderBytes) throw TruncationError(source + ": truncated header");
  if (std::memcmp(bytes.data(), kDatasetMagic, 4) != 0) throw SchemaError(source + ": bad magic");
  const char* p = bytes.data() + 4;
  const auto version = get<std::uint16_t>(p);
  if (version != kDatasetVersion)
    throw SchemaError(source + ": unsupported format version " + std::to_string(version));
  const auto tag = get<std::uint8_t>(p + 2);
  if (tag > 1) throw SchemaError(source + ": unknown task tag " + std::to_string(tag));
  DatasetHeader h;
  h.task.kind = static_cast<TaskKind>(tag);
  h.n_rows = get<std::uint64_t>(p + 3);
  h.n_features = get<std::uint32_t>(p + 11);
  h.task.n_classes = get<std::uint32_t>(p + 15);
  if (h.n_features == 0) throw SchemaError(source + ": zero features");
  if (h.task.is_classification() && h.task.n_classes == 0)
    throw SchemaError(source + ": classification dataset with zero classes");
  if (!h.task.is_classification() && h.task.n_classes != 0)
    throw SchemaError(source + ": regression dataset with nonzero class count");
  return h;
}

DatasetHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path.string());
  char buf[kDatasetHeaderBytes];
  in.read(buf, sizeof(buf));
  return decode_header({buf, static_cast<std::size_t>(in.gcount())}, path.string());
}

void encode_rows(const Block& rows, Task task, std::vector<char>& out) {
  const std::size_t d = rows.n_features;
  const std::size_t row_bytes = d * 4 + (task.is_classification() ? 4 : 8);
  const std::size_t base = out.size();
  out.resize(base + rows.size() * row_bytes);
  char* p = out.data() + base;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(p, rows.x.data() + i * d, d * 4);
    p += d * 4;
    if (task.is_classification()) {
      const auto label = static_cast<std::uint32_t>(rows.y[i]);
      std::memcpy(p, &label, 4);
      p += 4;
    } else {
      std::memcpy(p, &rows.y[i], 8);
      p += 8;
    }
  }
}

void decode_rows(std::span<const char> bytes, std::size_t count, Task task, Block& out) {
  const std::size_t d = out.n_features;
  const std::size_t row_bytes = d * 4 + (task.is_classification() ? 4 : 8);
  if (bytes.size() < count * row_bytes) throw TruncationError("row payload shorter than declared");
  const std::size_t x0 = out.x.size();
  out.x.resize(x0 + count * d);
  out.y.reserve(out.y.size() + count);
  const char* p = bytes.data();
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(out.x.data() + x0 + i * d, p, d * 4);
    p += d * 4;
    if (task.is_classification()) {
      out.y.push_back(static_cast<double>(get<std::uint32_t>(p)));
      p += 4;
    } else {
      out.y.push_back(get<double>(p));
      p += 8;
    }
  }
}

// ---------------------------------------------------------------------------

DatasetWriter::DatasetWriter(const std::filesystem::path& path, Task task, std::uint32_t n_features)
    : path_(path), task_(task), n_features_(n_features) {
  if (n_features == 0) throw ConfigError("dataset needs at least one feature");
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw StorageError("cannot write " + path.string());
  const auto header = encode_header({task_, 0, n_features_});
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

DatasetWriter::~DatasetWriter() {
  if (!finished_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
}

void DatasetWriter::append(const Block& rows) {
  if (rows.n_features != n_features_) throw DomainError("appended block has wrong feature count");
  scratch_.clear();
  encode_rows(rows, task_, scratch_);
  out_.write(scratch_.data(), static_cast<std::streamsize>(scratch_.size()));
  if (!out_) throw StorageError("write failed on " + path_.string());
  n_rows_ += rows.size();
}

DatasetHeader DatasetWriter::finish() {
  DatasetHeader h{task_, n_rows_, n_features_};
  const auto header = encode_header(h);
  out_.seekp(0);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
  out_.close();
  if (!out_) throw StorageError("failed to finalize " + path_.string());
  finished_ = true;
  return h;
}

void write_dataset(const std::filesystem::path& path, const Block& rows, Task task) {
  DatasetWriter writer(path, task, rows.n_features);
  writer.append(rows);
  writer.finish();
}

// ---------------------------------------------------------------------------

struct ChunkStream::Impl {
  DatasetHandle handle;
  std::ifstream in;
  DatasetHeader header;
  std::uint64_t next_row = 0;  // relative to the view
  ResidentRows resident;
  std::vector<char> buffer;
};

ChunkStream::ChunkStream(const DatasetHandle& handle, ResidentCounter* counter)
    : impl_(std::make_unique<Impl>()) {
  impl_->handle = handle;
  impl_->resident = ResidentRows(counter, 0);
  if (handle.on_disk()) {
    impl_->in.open(handle.path_, std::ios::binary);
    if (!impl_->in) throw StreamError(0, "cannot open " + handle.path_.string());
    impl_->header = {handle.task_, handle.end_, handle.n_features_};
  }
}

ChunkStream::ChunkStream(ChunkStream&&) noexcept = default;
ChunkStream& ChunkStream::operator=(ChunkStream&&) noexcept = default;
ChunkStream::~ChunkStream() = default;

bool ChunkStream::next(Chunk& chunk) {
  Impl& s = *impl_;
  const DatasetHandle& h = s.handle;
  chunk.rows.n_features = h.n_features_;
  chunk.rows.clear();
  s.resident.resize(0);
  if (s.next_row >= h.n_rows()) return false;
  const std::uint64_t count = std::min<std::uint64_t>(h.chunk_size_, h.n_rows() - s.next_row);
  const std::uint64_t absolute = h.begin_ + s.next_row;
  chunk.first_row = s.next_row;
  s.resident.resize(static_cast<std::int64_t>(count));
  if (h.on_disk()) {
    const std::uint64_t offset = kDatasetHeaderBytes + absolute * s.header.row_bytes();
    s.buffer.resize(count * s.header.row_bytes());
    s.in.seekg(static_cast<std::streamoff>(offset));
    s.in.read(s.buffer.data(), static_cast<std::streamsize>(s.buffer.size()));
    if (static_cast<std::size_t>(s.in.gcount()) != s.buffer.size()) {
      throw StreamError(offset + static_cast<std::uint64_t>(std::max<std::streamsize>(s.in.gcount(), 0)),
                        "short read from " + h.path_.string());
    }
    decode_rows(s.buffer, count, h.task_, chunk.rows);
  } else {
    const Block& m = *h.memory_;
    const std::size_t d = h.n_features_;
    chunk.rows.x.assign(m.x.begin() + static_cast<std::ptrdiff_t>(absolute * d),
                        m.x.begin() + static_cast<std::ptrdiff_t>((absolute + count) * d));
    chunk.rows.y.assign(m.y.begin() + static_cast<std::ptrdiff_t>(absolute),
                        m.y.begin() + static_cast<std::ptrdiff_t>(absolute + count));
  }
  s.next_row += count;
  return true;
}

// ---------------------------------------------------------------------------

DatasetHandle DatasetHandle::in_memory(std::shared_ptr<const Block> rows, Task task, std::size_t chunk_size) {
  if (!rows || rows->empty()) throw DomainError("in-memory dataset must have at least one row");
  if (rows->n_features == 0) throw DomainError("dataset needs at least one feature");
  if (chunk_size == 0) throw ConfigError("chunk size must be at least 1");
  DatasetHandle h;
  h.memory_ = std::move(rows);
  h.task_ = task;
  h.n_features_ = h.memory_->n_features;
  h.end_ = h.memory_->size();
  h.chunk_size_ = chunk_size;
  return h;
}

DatasetHandle DatasetHandle::open_binary(const std::filesystem::path& path, std::size_t chunk_size) {
  if (chunk_size == 0) throw ConfigError("chunk size must be at least 1");
  if (!std::filesystem::exists(path)) throw StorageError("no such file: " + path.string());
  const DatasetHeader header = read_header(path);
  const std::uint64_t expected = kDatasetHeaderBytes + header.payload_bytes();
  const std::uint64_t actual = std::filesystem::file_size(path);
  if (actual < expected) {
    throw TruncationError(path.string() + ": declared " + std::to_string(header.n_rows) +
                          " rows but payload holds " +
                          std::to_string((actual - kDatasetHeaderBytes) / header.row_bytes()));
  }
  if (actual > expected) throw SchemaError(path.string() + ": trailing bytes after row payload");
  if (header.n_rows == 0) throw ParseError(1, path.string() + ": dataset has no rows");
  DatasetHandle h;
  h.path_ = path;
  h.task_ = header.task;
  h.n_features_ = header.n_features;
  h.end_ = header.n_rows;
  h.chunk_size_ = chunk_size;
  return h;
}

DatasetHandle DatasetHandle::with_chunk_size(std::size_t chunk_size) const {
  if (chunk_size == 0) throw ConfigError("chunk size must be at least 1");
  DatasetHandle h = *this;
  h.chunk_size_ = chunk_size;
  return h;
}

DatasetHandle DatasetHandle::slice(std::uint64_t begin, std::uint64_t end) const {
  if (begin >= end || end > n_rows()) throw DomainError("invalid row range for dataset slice");
  DatasetHandle h = *this;
  h.begin_ = begin_ + begin;
  h.end_ = begin_ + end;
  return h;
}

Block DatasetHandle::materialize() const {
  Block all(n_features_);
  all.reserve(n_rows());
  ChunkStream stream = chunks();
  Chunk chunk;
  while (stream.next(chunk)) {
    all.x.insert(all.x.end(), chunk.rows.x.begin(), chunk.rows.x.end());
    all.y.insert(all.y.end(), chunk.rows.y.begin(), chunk.rows.y.end());
  }
  return all;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void split_cells(std::string_view line, std::vector<std::string_view>& cells) {
  cells.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

template <typename T>
bool parse_number(std::string_view cell, T& value) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(value);
}

}  // namespace

DatasetHeader ingest_csv(const std::filesystem::path& csv_path, const std::filesystem::path& out_path,
                         Task task) {
  std::ifstream in(csv_path);
  if (!in) throw StorageError("cannot open " + csv_path.string());

  std::unique_ptr<DatasetWriter> writer;
  Block pending;
  std::vector<std::string_view> cells;
  std::vector<float> features;
  std::string line;
  std::uint64_t line_no = 0;
  std::uint64_t max_label = 0;
  std::size_t arity = 0;
  constexpr std::size_t kFlushRows = 65536;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    split_cells(line, cells);
    if (arity == 0) {
      float probe;
      const bool numeric = std::all_of(cells.begin(), cells.end(), [&](std::string_view c) {
        return parse_number(c, probe);
      });
      if (!numeric && line_no == 1) continue;  // header line
      if (cells.size() < 2) throw ParseError(line_no, "need at least one feature column and a label");
      arity = cells.size();
      writer = std::make_unique<DatasetWriter>(out_path, task, static_cast<std::uint32_t>(arity - 1));
      pending = Block(static_cast<std::uint32_t>(arity - 1));
    }
    if (cells.size() != arity) {
      throw ParseError(line_no, "expected " + std::to_string(arity) + " columns, found " +
                                    std::to_string(cells.size()));
    }
    features.resize(arity - 1);
    for (std::size_t c = 0; c + 1 < arity; ++c) {
      if (cells[c].empty()) throw ParseError(line_no, "missing value in column " + std::to_string(c + 1));
      if (!parse_number(cells[c], features[c]))
        throw ParseError(line_no, "non-numeric value '" + std::string(cells[c]) + "' in column " +
                                      std::to_string(c + 1));
    }
    double label;
    if (cells.back().empty()) throw ParseError(line_no, "missing label");
    if (!parse_number(cells.back(), label))
      throw ParseError(line_no, "non-numeric label '" + std::string(cells.back()) + "'");
    if (task.is_classification()) {
      checked_class_label(line_no, label, task.n_classes);
      max_label = std::max(max_label, static_cast<std::uint64_t>(label));
    }
    pending.push_row(features, label);
    if (pending.size() >= kFlushRows) {
      writer->append(pending);
      pending.clear();
    }
  }
  if (in.bad()) throw StreamError(static_cast<std::uint64_t>(line_no), "read failure on " + csv_path.string());
  if (!writer) throw ParseError(std::max<std::uint64_t>(line_no, 1), csv_path.string() + ": no data rows");
  writer->append(pending);
  if (task.is_classification() && task.n_classes == 0)
    writer->set_n_classes(static_cast<std::uint32_t>(max_label + 1));
  return writer->finish();
}

DatasetHandle open_dataset(const std::filesystem::path& path, Format format, Task task, std::size_t chunk_size) {
  std::filesystem::path binary = path;
  if (format == Format::csv) {
    binary = path;
    binary += ".cnpy";
    ingest_csv(path, binary, task);
  }
  DatasetHandle h = DatasetHandle::open_binary(binary, chunk_size);
  if (h.task().kind != task.kind) throw SchemaError(path.string() + ": task kind differs from the declared task");
  if (task.n_classes != 0 && h.task().n_classes != task.n_classes)
    throw SchemaError(path.string() + ": class count differs from the declared task");
  return h;
}

// ---------------------------------------------------------------------------

namespace {

// Reservoir sampling, Algorithm L (skip-based variant of Algorithm R).
struct Reservoir {
  Rng rng;
  RandomSubset subset;
  std::size_t capacity = 0;
  double w = 0.0;
  std::uint64_t next = 0;  // next row index that enters the reservoir

  void advance(std::uint64_t never) {
    const double skip = std::floor(std::log(uniform01(rng)) / std::log1p(-w));
    next = (skip >= 0x1.0p62) ? never : next + static_cast<std::uint64_t>(skip) + 1;
  }
};

}  // namespace

std::vector<RandomSubset> reservoir_sample_many(const DatasetHandle& handle, std::size_t R,
                                                std::span<const std::uint64_t> seeds,
                                                ResidentCounter* counter) {
  if (R == 0) throw ConfigError("subset size must be at least 1");
  const std::uint64_t n = handle.n_rows();
  const std::size_t k = static_cast<std::size_t>(std::min<std::uint64_t>(R, n));
  const std::uint32_t d = handle.n_features();
  // Sentinel past every row index; `advance` saturates here.
  const std::uint64_t never = std::numeric_limits<std::uint64_t>::max();

  std::vector<Reservoir> pool(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    pool[s].rng = make_rng(seeds[s], {0x5a3b1e});
    pool[s].capacity = k;
    pool[s].subset.rows = Block(d);
    pool[s].subset.rows.reserve(k);
    pool[s].subset.row_ids.reserve(k);
    pool[s].subset.requested_size = R;
    pool[s].subset.seed = seeds[s];
    pool[s].subset.resident = ResidentRows(counter, 0);
  }

  ChunkStream stream = handle.chunks(counter);
  Chunk chunk;
  while (stream.next(chunk)) {
    const std::uint64_t first = chunk.first_row;
    const std::uint64_t end = first + chunk.rows.size();
    for (Reservoir& r : pool) {
      RandomSubset& sub = r.subset;
      std::uint64_t i = first;
      for (; i < end && sub.rows.size() < k; ++i) {
        sub.rows.push_row(chunk.rows.row(i - first), chunk.rows.y[i - first]);
        sub.row_ids.push_back(i);
        if (sub.rows.size() == k) {
          r.w = std::exp(std::log(uniform01(r.rng)) / static_cast<double>(k));
          r.next = i;
          r.advance(never);
        }
      }
      sub.resident.resize(static_cast<std::int64_t>(sub.rows.size()));
      while (sub.rows.size() == k && r.next < end) {
        const std::size_t slot = static_cast<std::size_t>(uniform_below(r.rng, k));
        const std::uint64_t src = r.next - first;
        const auto from = chunk.rows.row(src);
        std::copy(from.begin(), from.end(), sub.rows.row(slot).begin());
        sub.rows.y[slot] = chunk.rows.y[src];
        sub.row_ids[slot] = r.next;
        r.w *= std::exp(std::log(uniform01(r.rng)) / static_cast<double>(k));
        r.advance(never);
      }
    }
  }

  std::vector<RandomSubset> out;
  out.reserve(pool.size());
  for (Reservoir& r : pool) out.push_back(std::move(r.subset));
  return out;
}

RandomSubset reservoir_sample(const DatasetHandle& handle, std::size_t R, std::uint64_t seed,
                              ResidentCounter* counter) {
  const std::uint64_t seeds[1] = {seed};
  auto subsets = reservoir_sample_many(handle, R, seeds, counter);
  return std::move(subsets.front());
}

}  // namespace canopy
