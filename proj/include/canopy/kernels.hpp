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

// Data-parallel inner loops of the pipeline. Every OpenMP kernel has a
// plain serial twin with identical results; the serial versions are the
// reference the tests and benchmarks compare against.

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>

#include "canopy/data.hpp"
#include "canopy/tree.hpp"

namespace canopy::kernels {

/// Leaf bucket index of every row of `rows` in top tree `top`.
void route_rows(const TreeModel& top, const Block& rows, std::span<std::uint64_t> out, int jobs);
void route_rows_serial(const TreeModel& top, const Block& rows, std::span<std::uint64_t> out);

/// Per-tree prediction (class index or mean) for every row.
void predict_rows(const TreeModel& tree, const Block& rows, std::span<double> out, int jobs);
void predict_rows_serial(const TreeModel& tree, const Block& rows, std::span<double> out);

/// Poisson(1) multiplicity of dataset row `row` for bottom tree `tree` of
/// top tree `top`. Counter-based: independent of evaluation order.
std::uint32_t bootstrap_weight(std::uint64_t seed, std::uint32_t top, std::uint64_t row, std::uint32_t tree) noexcept;

/// Fills `out` (count x n_b, row-major) with multiplicities for rows
/// first_row, first_row + 1, ... .
void bootstrap_weights(std::uint64_t seed, std::uint32_t top, std::uint64_t first_row, std::size_t count,
                       std::uint32_t n_b, std::span<std::uint32_t> out, int jobs);
void bootstrap_weights_serial(std::uint64_t seed, std::uint32_t top, std::uint64_t first_row, std::size_t count,
                              std::uint32_t n_b, std::span<std::uint32_t> out);

/// Runs task(i) for i in [0, n) on `jobs` OpenMP threads with dynamic
/// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task);
void serial_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace canopy::kernels
