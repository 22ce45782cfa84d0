#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <unistd.h>

#include "canopy/data.hpp"
#include "canopy/random.hpp"

namespace testutil {

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> seq{0};
    const char* env = std::getenv("CANOPY_TEST_TMP");
    const std::filesystem::path root = env != nullptr ? env : std::filesystem::temp_directory_path() / "canopy-tests";
    path_ = root / ("t" + std::to_string(::getpid()) + "-" + std::to_string(seq.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random classification block; values on a coarse grid so ties occur.
inline canopy::Block random_block(std::uint64_t seed, std::size_t n, std::uint32_t d, std::uint32_t k,
                                  int grid = 8) {
  canopy::Rng rng = canopy::make_rng(seed, {0x7e57});
  canopy::Block b(d);
  std::vector<float> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = static_cast<float>(canopy::uniform_below(rng, grid)) / static_cast<float>(grid);
    b.push_row(x, static_cast<double>(canopy::uniform_below(rng, k)));
  }
  return b;
}

inline canopy::Block random_regression(std::uint64_t seed, std::size_t n, std::uint32_t d) {
  canopy::Rng rng = canopy::make_rng(seed, {0x7e58});
  canopy::Block b(d);
  std::vector<float> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (auto& v : x) {
      v = static_cast<float>(canopy::uniform01(rng));
      y += v;
    }
    b.push_row(x, y + 0.1 * canopy::uniform01(rng));
  }
  return b;
}

inline canopy::DatasetHandle memory_handle(canopy::Block b, canopy::Task task, std::size_t chunk = 64) {
  return canopy::DatasetHandle::in_memory(std::make_shared<const canopy::Block>(std::move(b)), task, chunk);
}

}  // namespace testutil
