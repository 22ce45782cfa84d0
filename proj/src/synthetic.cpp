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

#include "canopy/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "canopy/error.hpp"
#include "canopy/random.hpp"

namespace canopy {

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "rare-class") return SyntheticKind::rare_class;
  if (name == "skewed") return SyntheticKind::skewed;
  if (name == "gaussian-mixture") return SyntheticKind::gaussian_mixture;
  throw ConfigError("unknown generator '" + name + "' (expected rare-class, skewed or gaussian-mixture)");
}

const char* to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::rare_class: return "rare-class";
    case SyntheticKind::skewed: return "skewed";
    case SyntheticKind::gaussian_mixture: return "gaussian-mixture";
  }
  return "?";
}

Task SyntheticSpec::task() const {
  switch (kind) {
    case SyntheticKind::rare_class: return Task::classification(3);
    case SyntheticKind::skewed: return Task::classification(2);
    case SyntheticKind::gaussian_mixture: return Task::classification(n_classes);
  }
  return Task::classification(2);
}

std::uint32_t SyntheticSpec::features() const { return kind == SyntheticKind::skewed ? 2 : n_features; }

std::uint32_t rare_label(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::rare_class: return 2;
    case SyntheticKind::skewed: return 1;
    case SyntheticKind::gaussian_mixture: break;
  }
  throw ConfigError("gaussian-mixture has no rare class");
}

namespace {

// Counter-based stream: one independent sequence per row.
class RowStream {
 public:
  explicit RowStream(std::uint64_t seed) : state_(seed) {}
  double uniform() { return bits_to_open01(mix64(state_++)); }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

constexpr int kBlobsPerClass = 3;

void validate(const SyntheticSpec& spec) {
  if (spec.n_rows < 1) throw ConfigError("generator needs at least one row");
  if (spec.features() < 1) throw ConfigError("generator needs at least one feature");
  if (spec.kind == SyntheticKind::gaussian_mixture && spec.n_classes < 2)
    throw ConfigError("gaussian-mixture needs at least two classes");
  if (spec.kind != SyntheticKind::gaussian_mixture && !(spec.rare_fraction > 0.0 && spec.rare_fraction < 1.0))
    throw ConfigError("rare fraction must lie in (0, 1)");
}

float to_f32(double v) { return static_cast<float>(v); }

}  // namespace

Block generate_rows(const SyntheticSpec& spec, std::uint64_t first, std::uint64_t count) {
  validate(spec);
  const std::uint32_t d = spec.features();
  Block out(d);
  out.reserve(count);
  std::vector<float> x(d);

  // Mixture centers are fixed by the seed alone.
  std::vector<double> centers;
  if (spec.kind == SyntheticKind::gaussian_mixture) {
    RowStream c(derive_seed(spec.seed, {0xce47e5}));
    centers.resize(std::size_t{spec.n_classes} * kBlobsPerClass * d);
    for (double& v : centers) v = c.uniform();
  }

  for (std::uint64_t row = first; row < first + count; ++row) {
    RowStream s(derive_seed(spec.seed, {0x5717, static_cast<std::uint64_t>(spec.kind), row}));
    double label = 0.0;
    switch (spec.kind) {
      case SyntheticKind::rare_class: {
        if (s.uniform() < spec.rare_fraction) {
          label = 2.0;
          for (auto& v : x) v = to_f32(0.3 + 0.01 * s.normal());
        } else {
          const bool one = s.uniform() < 0.5;
          label = one ? 1.0 : 0.0;
          const double mu = one ? 0.6 : 0.4;
          for (auto& v : x) v = to_f32(mu + 0.2 * s.normal());
        }
        break;
      }
      case SyntheticKind::skewed: {
        const double side = std::sqrt(spec.rare_fraction);
        x[0] = to_f32(s.uniform());
        x[1] = to_f32(s.uniform());
        label = (x[0] > 1.0 - side && x[1] > 1.0 - side) ? 1.0 : 0.0;
        break;
      }
      case SyntheticKind::gaussian_mixture: {
        const auto cls = static_cast<std::uint32_t>(s.uniform() * spec.n_classes);
        const auto blob = static_cast<std::uint32_t>(s.uniform() * kBlobsPerClass);
        const double* mu = centers.data() + (std::size_t{cls} * kBlobsPerClass + blob) * d;
        for (std::uint32_t f = 0; f < d; ++f) x[f] = to_f32(mu[f] + 0.15 * s.normal());
        label = std::min(cls, spec.n_classes - 1);
        break;
      }
    }
    out.push_row(x, label);
  }
  return out;
}

Block generate(const SyntheticSpec& spec) { return generate_rows(spec, 0, spec.n_rows); }

void generate_to_file(const SyntheticSpec& spec, const std::filesystem::path& path, std::size_t chunk) {
  validate(spec);
  if (chunk == 0) chunk = kDefaultChunkSize;
  DatasetWriter writer(path, spec.task(), spec.features());
  for (std::uint64_t first = 0; first < spec.n_rows; first += chunk)
    writer.append(generate_rows(spec, first, std::min<std::uint64_t>(chunk, spec.n_rows - first)));
  writer.finish();
}

}  // namespace canopy
