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

#include "canopy/kernels.hpp"

#include <omp.h>

#include "canopy/error.hpp"
#include "canopy/random.hpp"

namespace canopy::kernels {

namespace {

void check_arity(const TreeModel& tree, const Block& rows) {
  if (rows.n_features != tree.n_features())
    throw DomainError("rows have " + std::to_string(rows.n_features) + " features, tree expects " +
                      std::to_string(tree.n_features()));
}

int clamp_jobs(int jobs) { return jobs < 1 ? 1 : jobs; }

}  // namespace

void route_rows(const TreeModel& top, const Block& rows, std::span<std::uint64_t> out, int jobs) {
  check_arity(top, rows);
  const auto n = static_cast<std::int64_t>(rows.size());
  const auto nodes = top.nodes();
#pragma omp parallel for schedule(static) num_threads(clamp_jobs(jobs))
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = nodes[top.find_leaf_unchecked(rows.x.data() + i * rows.n_features)].bucket;
  }
}

void route_rows_serial(const TreeModel& top, const Block& rows, std::span<std::uint64_t> out) {
  check_arity(top, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = predict_leaf_index(top, rows.row(i));
}

void predict_rows(const TreeModel& tree, const Block& rows, std::span<double> out, int jobs) {
  check_arity(tree, rows);
  const auto n = static_cast<std::int64_t>(rows.size());
  const auto nodes = tree.nodes();
#pragma omp parallel for schedule(static) num_threads(clamp_jobs(jobs))
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = nodes[tree.find_leaf_unchecked(rows.x.data() + i * rows.n_features)].label;
  }
}

void predict_rows_serial(const TreeModel& tree, const Block& rows, std::span<double> out) {
  check_arity(tree, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = predict(tree, rows.row(i));
}

std::uint32_t bootstrap_weight(std::uint64_t seed, std::uint32_t top, std::uint64_t row, std::uint32_t tree) noexcept {
  return poisson1_from_uniform(bits_to_open01(derive_seed(seed, {0xb0075742ULL, top, row, tree})));
}

void bootstrap_weights(std::uint64_t seed, std::uint32_t top, std::uint64_t first_row, std::size_t count,
                       std::uint32_t n_b, std::span<std::uint32_t> out, int jobs) {
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static) num_threads(clamp_jobs(jobs))
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::uint32_t b = 0; b < n_b; ++b)
      out[static_cast<std::size_t>(i) * n_b + b] = bootstrap_weight(seed, top, first_row + i, b);
  }
}

void bootstrap_weights_serial(std::uint64_t seed, std::uint32_t top, std::uint64_t first_row, std::size_t count,
                              std::uint32_t n_b, std::span<std::uint32_t> out) {
  for (std::size_t i = 0; i < count; ++i)
    for (std::uint32_t b = 0; b < n_b; ++b) out[i * n_b + b] = bootstrap_weight(seed, top, first_row + i, b);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  std::exception_ptr failure;
  std::mutex guard;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(clamp_jobs(jobs))
  for (std::int64_t i = 0; i < count; ++i) {
    {
      std::lock_guard lock(guard);
      if (failure) continue;
    }
    try {
      task(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void serial_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  for (std::size_t i = 0; i < n; ++i) task(i);
}

}  // namespace canopy::kernels
