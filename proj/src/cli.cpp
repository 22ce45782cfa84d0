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

#include "canopy/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "canopy/error.hpp"
#include "canopy/forest.hpp"
#include "canopy/synthetic.hpp"

namespace canopy::cli {

namespace {

using json = nlohmann::ordered_json;

struct DataOptions {
  std::string path;
  std::string format;  // csv | binary | "" (by extension)
  std::string task = "classification";
  std::uint32_t classes = 0;
  std::size_t chunk = kDefaultChunkSize;
};

struct TrainOptions {
  std::string scheme = "woody";
  std::optional<std::uint32_t> trees, top_trees, bottom_per_top;
  double lambda = 1.0;
  std::optional<std::uint64_t> subset_size, leaf_bucket_size;
  std::string store = "memory";
  std::string scratch_dir;
  std::uint64_t seed = 0;
  int jobs = 4;
  double hard_cap = 8.0;
  std::optional<std::uint32_t> max_features;
  std::string criterion;  // empty: gini or variance by task
  std::optional<std::uint32_t> max_depth;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  bool no_bootstrap = false;
  std::uint64_t baseline_subset_size = 500000;
  std::size_t write_buffer_rows = 1024;
  bool keep_scratch = false;
};

void add_data_options(CLI::App* cmd, DataOptions& o, const char* what) {
  cmd->add_option("dataset", o.path, what)->required();
  cmd->add_option("--format", o.format, "Dataset format: csv or binary (default: by extension)")
      ->check(CLI::IsMember({"csv", "binary"}));
  cmd->add_option("--task", o.task, "classification or regression (csv input)")
      ->check(CLI::IsMember({"classification", "regression"}));
  cmd->add_option("--classes", o.classes, "Class count for csv input (0: infer)");
  cmd->add_option("--chunk-size", o.chunk, "Rows per streaming chunk (C)");
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--scheme", o.scheme, "woody, subsets or standard")
      ->check(CLI::IsMember({"woody", "subsets", "standard"}));
  cmd->add_option("--trees", o.trees, "Total number of trees");
  cmd->add_option("--top-trees", o.top_trees, "Number of top trees (n_top)");
  cmd->add_option("--bottom-per-top", o.bottom_per_top, "Bottom trees per top tree (n_b)");
  cmd->add_option("--lambda", o.lambda, "Balance tradeoff in [0, 1]");
  cmd->add_option("--subset-size", o.subset_size, "Top-tree subset size (R)");
  cmd->add_option("--leaf-bucket-size", o.leaf_bucket_size, "Target leaf bucket size (M)");
  cmd->add_option("--store", o.store, "Scratch store: memory or disk")->check(CLI::IsMember({"memory", "disk"}));
  cmd->add_option("--scratch-dir", o.scratch_dir, "Scratch root for the disk store (env CANOPY_SCRATCH)");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads");
  cmd->add_option("--hard-cap-multiplier", o.hard_cap, "Re-split buckets above this multiple of M");
  cmd->add_option("--max-features", o.max_features, "Features per bottom-tree node (default sqrt(d))");
  cmd->add_option("--criterion", o.criterion, "gini, entropy or variance (default by task)");
  cmd->add_option("--max-depth", o.max_depth, "Bottom-tree depth cap (default: fully grown)");
  cmd->add_option("--min-samples-split", o.min_samples_split, "Minimum rows to split a node");
  cmd->add_option("--min-samples-leaf", o.min_samples_leaf, "Minimum rows per child");
  cmd->add_flag("--no-bootstrap", o.no_bootstrap, "Disable bootstrap weights");
  cmd->add_option("--baseline-subset-size", o.baseline_subset_size, "Rows per tree for the subsets scheme");
  cmd->add_option("--write-buffer-rows", o.write_buffer_rows, "Buffered rows per disk bucket writer");
  cmd->add_flag("--keep-scratch", o.keep_scratch, "Keep the scratch directory after training");
}

Format resolve_format(const DataOptions& o) {
  if (o.format == "csv") return Format::csv;
  if (o.format == "binary") return Format::binary;
  return std::filesystem::path(o.path).extension() == ".csv" ? Format::csv : Format::binary;
}

Task declared_task(const DataOptions& o) {
  return o.task == "regression" ? Task::regression() : Task::classification(o.classes);
}

DatasetHandle open_data(const DataOptions& o) {
  if (o.chunk < 1) throw ConfigError("chunk size must be at least 1");
  const Format format = resolve_format(o);
  if (format == Format::binary) return DatasetHandle::open_binary(o.path, o.chunk);
  return open_dataset(o.path, format, declared_task(o), o.chunk);
}

// Resolves the tree counts; fails before any work is done.
std::pair<std::uint32_t, std::uint32_t> resolve_shape(const TrainOptions& o, Scheme scheme) {
  auto positive = [](const std::optional<std::uint32_t>& v, const char* flag) {
    if (v && *v < 1) throw ConfigError(std::string(flag) + " must be at least 1");
  };
  positive(o.trees, "--trees");
  positive(o.top_trees, "--top-trees");
  positive(o.bottom_per_top, "--bottom-per-top");
  if (scheme != Scheme::woody) {
    if (o.trees) return {*o.trees, 1};
    return {o.top_trees.value_or(1) * o.bottom_per_top.value_or(1), 1};
  }
  std::uint32_t n_top = 0, n_b = 0;
  if (o.top_trees && o.bottom_per_top) {
    n_top = *o.top_trees;
    n_b = *o.bottom_per_top;
  } else if (o.trees && o.top_trees) {
    n_top = *o.top_trees;
    n_b = *o.trees / n_top;
  } else if (o.trees && o.bottom_per_top) {
    n_b = *o.bottom_per_top;
    n_top = *o.trees / n_b;
  } else if (o.trees) {
    n_top = *o.trees;
    n_b = 1;
  } else {
    n_top = o.top_trees.value_or(1);
    n_b = o.bottom_per_top.value_or(1);
  }
  if (n_top < 1 || n_b < 1 || (o.trees && std::uint64_t{n_top} * n_b != *o.trees))
    throw ConfigError("--trees must equal --top-trees x --bottom-per-top");
  return {n_top, n_b};
}

ForestConfig make_config(const TrainOptions& o, Scheme scheme) {
  ForestConfig c;
  std::tie(c.n_top, c.n_b) = resolve_shape(o, scheme);
  c.subset_size = o.subset_size;
  c.leaf_bucket_size = o.leaf_bucket_size;
  c.lambda = o.lambda;
  c.store = o.store == "disk" ? StoreKind::disk : StoreKind::memory;
  c.scratch_dir = o.scratch_dir;
  c.seed = o.seed;
  c.jobs = o.jobs;
  c.hard_cap_multiplier = o.hard_cap;
  c.bottom.gain.features_per_node = o.max_features;
  if (!o.criterion.empty()) c.bottom.gain.measure = parse_impurity(o.criterion);
  c.bottom.gain.min_samples_leaf = o.min_samples_leaf;
  c.bottom.max_depth = o.max_depth;
  c.bottom.min_samples_split = o.min_samples_split;
  c.bootstrap = !o.no_bootstrap;
  c.baseline_subset_size = o.baseline_subset_size;
  c.write_buffer_rows = o.write_buffer_rows;
  c.keep_scratch = o.keep_scratch;
  if (o.max_features && *o.max_features < 1) throw ConfigError("--max-features must be at least 1");
  c.validate();
  return c;
}

// Fails early on task/criterion mismatches that would only surface mid-run.
void check_against_data(const ForestConfig& c, const DatasetHandle& data, const std::string& criterion) {
  const bool variance = c.bottom.gain.measure == Impurity::variance;
  if (!criterion.empty() && data.task().is_classification() == variance)
    throw ConfigError(std::string("criterion ") + to_string(c.bottom.gain.measure) + " does not fit a " +
                      (data.task().is_classification() ? "classification" : "regression") + " dataset");
  if (c.bottom.gain.features_per_node && *c.bottom.gain.features_per_node > data.n_features())
    throw ConfigError("--max-features exceeds the dataset's feature count");
}

struct Score {
  std::optional<double> accuracy;
  std::optional<double> mse;
};

Score score(const Task& task, std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw DomainError("prediction count differs from label count");
  if (truth.empty()) throw DomainError("cannot score an empty test set");
  Score s;
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (task.is_classification())
      acc += predicted[i] == truth[i] ? 1.0 : 0.0;
    else
      acc += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
  }
  acc /= static_cast<double>(truth.size());
  if (task.is_classification())
    s.accuracy = acc;
  else
    s.mse = acc;
  return s;
}

std::vector<double> labels_of(const DatasetHandle& data) {
  std::vector<double> y;
  y.reserve(data.n_rows());
  ChunkStream stream = data.chunks();
  Chunk chunk;
  while (stream.next(chunk)) y.insert(y.end(), chunk.rows.y.begin(), chunk.rows.y.end());
  return y;
}

json metrics_json(Scheme scheme, const ForestConfig& c, std::uint64_t n_train, const TrainingReport& r,
                  const Score& s) {
  json j;
  j["scheme"] = to_string(scheme);
  j["n_train"] = n_train;
  j["seed"] = c.seed;
  j["total_trees"] = c.total_trees();
  j["n_top"] = scheme == Scheme::woody ? c.n_top : c.total_trees();
  j["n_b"] = scheme == Scheme::woody ? c.n_b : 1;
  j["sample_top_seconds"] = r.sample_top_seconds;
  j["distribute_seconds"] = r.distribute_seconds;
  j["bottom_seconds"] = r.bottom_seconds;
  j["total_seconds"] = r.total_seconds;
  j["peak_resident_rows"] = std::max(r.peak_resident_phase12, r.peak_resident_phase3);
  j["peak_resident_phase12"] = r.peak_resident_phase12;
  j["peak_resident_phase3"] = r.peak_resident_phase3;
  j["subset_size"] = r.subset_size;
  j["leaf_bucket_size"] = r.leaf_bucket_size;
  j["chunk_size"] = r.chunk_size;
  j["max_bucket_rows"] = r.max_bucket_rows;
  j["n_buckets"] = r.n_buckets;
  j["n_resplits"] = r.n_resplits;
  j["accuracy"] = s.accuracy ? json(*s.accuracy) : json(nullptr);
  j["mse"] = s.mse ? json(*s.mse) : json(nullptr);
  return j;
}

std::string format_label(const Task& task, double v) {
  char buf[40];
  if (task.is_classification())
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + '"';
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw ConfigError(std::string("empty entry in ") + flag);
    if constexpr (std::is_same_v<T, std::string>) {
      out.push_back(item);
    } else {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(item, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != item.size() || item[0] == '-') throw ConfigError(std::string("bad number in ") + flag + ": " + item);
      out.push_back(static_cast<T>(v));
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " is empty");
  return out;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const DataOptions& o, const std::string& output, std::ostream& out) {
  if (output.empty()) throw ConfigError("ingest needs --output");
  const DatasetHeader h = ingest_csv(o.path, output, declared_task(o));
  out << "n_rows=" << h.n_rows << " d=" << h.n_features << " k=" << h.task.n_classes << '\n';
  return 0;
}

int cmd_generate(const SyntheticSpec& spec, const std::string& output, const std::string& format,
                 std::ostream& out) {
  if (output.empty()) throw ConfigError("generate needs --output");
  if (format == "csv") {
    const Block rows = generate(spec);
    std::ofstream f(output, std::ios::trunc);
    if (!f) throw StorageError("cannot write " + output);
    for (std::uint32_t j = 0; j < rows.n_features; ++j) f << 'x' << j << ',';
    f << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (float v : rows.row(i)) {
        std::snprintf(buf, sizeof(buf), "%.9g,", static_cast<double>(v));
        f << buf;
      }
      f << format_label(spec.task(), rows.y[i]) << '\n';
    }
    if (!f) throw StorageError("write failed: " + output);
  } else {
    generate_to_file(spec, output);
  }
  out << "n_rows=" << spec.n_rows << " d=" << spec.features() << " k=" << spec.task().n_classes << '\n';
  return 0;
}

int cmd_train(const DataOptions& d, const TrainOptions& t, const std::string& model_path,
              const std::optional<DataOptions>& test, const std::string& report_path, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const Scheme scheme = parse_scheme(t.scheme);
  const ForestConfig config = make_config(t, scheme);
  if (model_path.empty()) throw ConfigError("train needs --output for the model file");
  const DatasetHandle data = open_data(d);
  check_against_data(config, data, t.criterion);
  std::optional<DatasetHandle> test_data;
  if (test) {
    test_data = open_data(*test);
    if (test_data->n_features() != data.n_features() || test_data->task().kind != data.task().kind)
      throw ConfigError("test set disagrees with the training set on d or task");
  }

  TrainingReport report;
  const ForestModel model = train_forest(scheme, data, config, &report);
  save_forest(model, model_path);
  Score s;
  if (test_data) s = score(model.task, predict_dataset(model, *test_data, config.jobs), labels_of(*test_data));
  report.total_seconds =
      std::max(report.total_seconds, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  const std::string line = metrics_json(scheme, config, data.n_rows(), report, s).dump();
  if (report_path.empty()) {
    out << line << '\n';
  } else {
    std::ofstream f(report_path, std::ios::app);
    if (!f) throw StorageError("cannot write " + report_path);
    f << line << '\n';
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const DataOptions& d, int jobs, const std::string& output,
                std::ostream& out) {
  const ForestModel model = load_forest(model_path);
  const DatasetHandle data = open_data(d);
  if (data.n_features() != model.n_features)
    throw ConfigError("dataset has " + std::to_string(data.n_features()) + " features, model expects " +
                      std::to_string(model.n_features));
  const auto pred = predict_dataset(model, data, jobs);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::trunc);
    if (!file) throw StorageError("cannot write " + output);
  }
  std::ostream& sink = output.empty() ? out : file;
  for (double v : pred) sink << format_label(model.task, v) << '\n';
  if (!sink) throw StorageError("write failed: " + output);
  return 0;
}

int cmd_evaluate(const std::string& model_path, const DataOptions& d, int jobs, std::ostream& out) {
  const ForestModel model = load_forest(model_path);
  const DatasetHandle data = open_data(d);
  if (data.n_features() != model.n_features)
    throw ConfigError("dataset has " + std::to_string(data.n_features()) + " features, model expects " +
                      std::to_string(model.n_features));
  if (data.task().kind != model.task.kind) throw ConfigError("dataset task differs from the model's");
  const Score s = score(model.task, predict_dataset(model, data, jobs), labels_of(data));
  if (s.accuracy)
    out << "accuracy " << fixed6(*s.accuracy) << '\n';
  else
    out << "mse " << fixed6(*s.mse) << '\n';
  return 0;
}

}  // namespace

const std::vector<std::string>& benchmark_columns() {
  static const std::vector<std::string> columns = {
      "scheme",         "n_train",        "seed",          "total_trees",        "n_top",
      "n_b",            "sample_top_seconds", "distribute_seconds", "bottom_seconds", "total_seconds",
      "peak_resident_rows", "accuracy",   "mse",           "status"};
  return columns;
}

namespace {

int cmd_benchmark(const DataOptions& d, const TrainOptions& t, const std::optional<DataOptions>& test,
                  const std::string& schemes_text, const std::string& sizes_text, const std::string& seeds_text,
                  const std::string& output, std::ostream& out) {
  const auto schemes = parse_list<std::string>(schemes_text, "--schemes");
  for (const auto& s : schemes) parse_scheme(s);
  const auto seeds = parse_list<std::uint64_t>(seeds_text, "--seeds");
  std::vector<std::uint64_t> sizes;
  if (!sizes_text.empty()) sizes = parse_list<std::uint64_t>(sizes_text, "--sizes");
  for (const auto& s : schemes) make_config(t, parse_scheme(s));  // grid validation up front

  const DatasetHandle all = open_data(d);
  DatasetHandle train = all;
  DatasetHandle held_out = all;
  if (test) {
    held_out = open_data(*test);
    if (held_out.n_features() != all.n_features() || held_out.task().kind != all.task().kind)
      throw ConfigError("test set disagrees with the training set on d or task");
  } else {
    const std::uint64_t cut = all.n_rows() - all.n_rows() / 5;
    if (cut == 0 || cut == all.n_rows()) throw DomainError("dataset too small for a last-20% test split");
    train = all.slice(0, cut);
    held_out = all.slice(cut, all.n_rows());
  }
  if (sizes.empty()) sizes.push_back(train.n_rows());
  const std::vector<double> truth = labels_of(held_out);

  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::trunc);
    if (!file) throw StorageError("cannot write " + output);
  }
  std::ostream& sink = output.empty() ? out : file;
  const auto& columns = benchmark_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) sink << (i ? "," : "") << columns[i];
  sink << '\n';

  for (const auto& scheme_name : schemes) {
    const Scheme scheme = parse_scheme(scheme_name);
    for (std::uint64_t n_train : sizes) {
      for (std::uint64_t seed : seeds) {
        TrainOptions cell = t;
        cell.seed = seed;
        const ForestConfig config = make_config(cell, scheme);
        TrainingReport r;
        Score s;
        std::string status = "ok";
        try {
          if (n_train < 1 || n_train > train.n_rows())
            throw ConfigError("n_train " + std::to_string(n_train) + " outside [1, " +
                              std::to_string(train.n_rows()) + "]");
          check_against_data(config, train, t.criterion);
          const ForestModel model = train_forest(scheme, train.slice(0, n_train), config, &r);
          s = score(model.task, predict_dataset(model, held_out, config.jobs), truth);
        } catch (const std::exception& e) {
          status = std::string("error: ") + e.what();
        }
        const std::int64_t peak = std::max(r.peak_resident_phase12, r.peak_resident_phase3);
        sink << scheme_name << ',' << n_train << ',' << seed << ',' << config.total_trees() << ','
             << (scheme == Scheme::woody ? config.n_top : config.total_trees()) << ','
             << (scheme == Scheme::woody ? config.n_b : 1) << ',' << fixed6(r.sample_top_seconds) << ','
             << fixed6(r.distribute_seconds) << ',' << fixed6(r.bottom_seconds) << ',' << fixed6(r.total_seconds)
             << ',' << peak << ',' << (s.accuracy ? fixed6(*s.accuracy) : "") << ','
             << (s.mse ? fixed6(*s.mse) : "") << ',' << csv_field(status) << '\n';
        sink.flush();
      }
    }
  }
  return 0;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::data: return kExitData;
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::storage: return kExitStorage;
  }
  return kExitStorage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-core random forests"};
  app.name("canopy");
  app.require_subcommand(1);

  DataOptions data, test_data;
  TrainOptions train;
  std::string output, report_path, model_path, test_path;
  int jobs = 4;

  auto* ingest = app.add_subcommand("ingest", "Convert a csv file to the binary dataset format");
  ingest->add_option("csv", data.path, "Input csv (label in the last column)")->required();
  ingest->add_option("--task", data.task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  ingest->add_option("--classes", data.classes, "Class count (0: infer)");
  ingest->add_option("--output", output, "Binary dataset to write");

  SyntheticSpec spec;
  std::string generator, gen_format = "binary";
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--generate", generator, "rare-class, skewed or gaussian-mixture")->required();
  gen->add_option("--rows", spec.n_rows, "Number of rows");
  gen->add_option("--features", spec.n_features, "Number of features");
  gen->add_option("--classes", spec.n_classes, "Number of classes (gaussian-mixture)");
  gen->add_option("--rare-fraction", spec.rare_fraction, "Mass of the rare cluster / minority cell");
  gen->add_option("--seed", spec.seed, "Random seed");
  gen->add_option("--output", output, "File to write");
  gen->add_option("--format", gen_format, "binary or csv")->check(CLI::IsMember({"csv", "binary"}));

  auto* tr = app.add_subcommand("train", "Train a forest");
  add_data_options(tr, data, "Training dataset");
  add_train_options(tr, train);
  tr->add_option("--output", model_path, "Model file to write");
  tr->add_option("--test", test_path, "Optional test set scored into the report");
  tr->add_option("--report", report_path, "Append the json-lines report here instead of stdout");

  auto* pr = app.add_subcommand("predict", "Predict a dataset");
  pr->add_option("--model", model_path, "Model file")->required();
  add_data_options(pr, data, "Dataset to predict");
  pr->add_option("--jobs", jobs, "Worker threads");
  pr->add_option("--output", output, "Predictions file (default stdout)");

  auto* ev = app.add_subcommand("evaluate", "Score a model on a labeled dataset");
  ev->add_option("--model", model_path, "Model file")->required();
  add_data_options(ev, data, "Labeled dataset");
  ev->add_option("--jobs", jobs, "Worker threads");

  std::string schemes = "woody", sizes, seeds = "0";
  auto* bench = app.add_subcommand("benchmark", "Run a grid of schemes, sizes and seeds");
  add_data_options(bench, data, "Dataset (last 20% is the test split unless --test is given)");
  add_train_options(bench, train);
  bench->add_option("--test", test_path, "Separate test set");
  bench->add_option("--schemes", schemes, "Comma-separated schemes");
  bench->add_option("--sizes", sizes, "Comma-separated training sizes (default: all training rows)");
  bench->add_option("--seeds", seeds, "Comma-separated seeds");
  bench->add_option("--output", output, "csv file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    std::optional<DataOptions> test;
    if (!test_path.empty()) {
      test = data;
      test->path = test_path;
    }
    if (ingest->parsed()) return cmd_ingest(data, output, out);
    if (gen->parsed()) {
      spec.kind = parse_synthetic_kind(generator);
      return cmd_generate(spec, output, gen_format, out);
    }
    if (tr->parsed()) return cmd_train(data, train, model_path, test, report_path, out);
    if (pr->parsed()) return cmd_predict(model_path, data, jobs, output, out);
    if (ev->parsed()) return cmd_evaluate(model_path, data, jobs, out);
    if (bench->parsed()) return cmd_benchmark(data, train, test, schemes, sizes, seeds, output, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitStorage;
  }
  return kExitConfig;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace canopy::cli
