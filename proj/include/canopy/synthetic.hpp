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

// Synthetic classification datasets. Rows are a pure function of
// (spec, row index), so a file written in chunks equals the in-memory block.

#include <cstdint>
#include <filesystem>
#include <string>

#include "canopy/data.hpp"

namespace canopy {

enum class SyntheticKind {
  /// Two overlapping Gaussian classes in [0,1]^d plus a tight cluster of
  /// class 2, inside class 0's region, holding `rare_fraction` of the rows.
  rare_class,
  /// Uniform 2-D square; class 1 occupies the top-right corner cell that
  /// holds `rare_fraction` of the area, class 0 everything else.
  skewed,
  /// k classes, each a mixture of three Gaussian blobs in d dimensions.
  gaussian_mixture,
};

SyntheticKind parse_synthetic_kind(const std::string& name);
const char* to_string(SyntheticKind kind);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_mixture;
  std::uint64_t n_rows = 1000;
  std::uint32_t n_features = 8;  ///< skewed is always 2-D
  std::uint32_t n_classes = 3;   ///< gaussian-mixture only
  double rare_fraction = 0.005;
  std::uint64_t seed = 0;

  Task task() const;
  std::uint32_t features() const;
};

/// Label of the rare cluster / minority class.
std::uint32_t rare_label(const SyntheticSpec& spec);

/// Rows [first, first + count) of the dataset.
Block generate_rows(const SyntheticSpec& spec, std::uint64_t first, std::uint64_t count);
Block generate(const SyntheticSpec& spec);
/// Writes the dataset as a binary file, `chunk` rows at a time.
void generate_to_file(const SyntheticSpec& spec, const std::filesystem::path& path,
                      std::size_t chunk = kDefaultChunkSize);

}  // namespace canopy
