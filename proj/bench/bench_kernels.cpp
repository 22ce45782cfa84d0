// Parallel kernels against their serial references. The last argument of
// each parallel benchmark is the job count.

#include <benchmark/benchmark.h>

#include <vector>

#include "canopy/forest.hpp"
#include "canopy/kernels.hpp"
#include "canopy/synthetic.hpp"
#include "canopy/tree.hpp"

using namespace canopy;

namespace {

constexpr std::uint64_t kRows = 200000;

const Block& rows() {
  static const Block b = generate(SyntheticSpec{SyntheticKind::gaussian_mixture, kRows, 8, 4, 0.0, 1});
  return b;
}

const TreeModel& top_tree() {
  static const TreeModel t = [] {
    Rng rng = make_rng(1);
    const Block subset = generate(SyntheticSpec{SyntheticKind::gaussian_mixture, 20000, 8, 4, 0.0, 2});
    return build_top_tree(subset, Task::classification(4), BuildParams::top_tree(20, 1.0), rng);
  }();
  return t;
}

const TreeModel& full_tree() {
  static const TreeModel t = [] {
    Rng rng = make_rng(2);
    const Block train = generate(SyntheticSpec{SyntheticKind::gaussian_mixture, 50000, 8, 4, 0.0, 3});
    return build_tree(train, {}, Task::classification(4), BuildParams{}, rng);
  }();
  return t;
}

void BM_route_serial(benchmark::State& state) {
  std::vector<std::uint64_t> out(kRows);
  for (auto _ : state) {
    kernels::route_rows_serial(top_tree(), rows(), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows);
}

void BM_route_parallel(benchmark::State& state) {
  std::vector<std::uint64_t> out(kRows);
  for (auto _ : state) {
    kernels::route_rows(top_tree(), rows(), out, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows);
}

void BM_predict_serial(benchmark::State& state) {
  std::vector<double> out(kRows);
  for (auto _ : state) {
    kernels::predict_rows_serial(full_tree(), rows(), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows);
}

void BM_predict_parallel(benchmark::State& state) {
  std::vector<double> out(kRows);
  for (auto _ : state) {
    kernels::predict_rows(full_tree(), rows(), out, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows);
}

void BM_bootstrap_serial(benchmark::State& state) {
  const auto n_b = static_cast<std::uint32_t>(state.range(0));
  std::vector<std::uint32_t> out(kRows * n_b);
  for (auto _ : state) {
    kernels::bootstrap_weights_serial(7, 0, 0, kRows, n_b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows * n_b);
}

void BM_bootstrap_parallel(benchmark::State& state) {
  const auto n_b = static_cast<std::uint32_t>(state.range(0));
  std::vector<std::uint32_t> out(kRows * n_b);
  for (auto _ : state) {
    kernels::bootstrap_weights(7, 0, 0, kRows, n_b, out, static_cast<int>(state.range(1)));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * kRows * n_b);
}

const ForestModel& forest() {
  static const ForestModel model = [] {
    ForestConfig c;
    c.n_top = 2;
    c.n_b = 4;
    c.subset_size = 5000;
    c.leaf_bucket_size = 5000;
    c.jobs = 1;
    const auto data = std::make_shared<const Block>(
        generate(SyntheticSpec{SyntheticKind::gaussian_mixture, 50000, 8, 4, 0.0, 4}));
    return build_big_forest(DatasetHandle::in_memory(data, Task::classification(4), 10000), c);
  }();
  return model;
}

void BM_forest_predict(benchmark::State& state) {
  const ForestModel& model = forest();
  if (state.range(0) == 0) {
    for (auto _ : state) benchmark::DoNotOptimize(predict_forest_serial(model, rows()));
  } else {
    for (auto _ : state)
      benchmark::DoNotOptimize(predict_forest(model, rows(), static_cast<int>(state.range(0))));
  }
  state.SetItemsProcessed(state.iterations() * kRows);
}

}  // namespace

BENCHMARK(BM_route_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_route_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_serial)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_parallel)->Args({4, 1})->Args({4, 2})->Args({4, 4})->Unit(benchmark::kMillisecond);
// Argument 0 selects the serial reference.
BENCHMARK(BM_forest_predict)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  // Build the fixtures outside the timed regions.
  rows();
  top_tree();
  full_tree();
  forest();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
