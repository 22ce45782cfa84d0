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

// Container layout:
//
//   canopy-forest 1
//   task classification|regression
//   k <classes>
//   d <features>
//   combiner vote|mean
//   units <count>
//   config <key> <value>          (zero or more)
//   tree <unit> top <bytes>
//   tree <unit> leaf <leaf> <b> <bytes>
//   end
//   <tree blobs in the order listed>

#include <fstream>
#include <sstream>

#include "canopy/error.hpp"
#include "canopy/forest.hpp"

namespace canopy {

namespace {

constexpr const char* kMagicLine = "canopy-forest";
constexpr int kForestVersion = 1;

void append_blob(std::vector<char>& out, std::ostringstream& manifest, const TreeModel& tree, const std::string& label) {
  const std::size_t before = out.size();
  serialize_tree(tree, out);
  manifest << "tree " << label << ' ' << (out.size() - before) << '\n';
}

[[noreturn]] void bad(const std::string& what) { throw FormatError("forest file: " + what); }

std::uint64_t to_u64(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    if (s.empty() || s[0] == '-') bad(std::string("bad ") + what);
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) bad(std::string("bad ") + what);
    return v;
  } catch (const std::logic_error&) {
    bad(std::string("bad ") + what);
  }
}

}  // namespace

std::vector<char> serialize_forest(const ForestModel& model) {
  model.validate();
  std::ostringstream manifest;
  manifest << kMagicLine << ' ' << kForestVersion << '\n';
  manifest << "task " << (model.task.is_classification() ? "classification" : "regression") << '\n';
  manifest << "k " << model.task.n_classes << '\n';
  manifest << "d " << model.n_features << '\n';
  manifest << "combiner " << (model.combiner == Combiner::vote ? "vote" : "mean") << '\n';
  manifest << "units " << model.units.size() << '\n';
  for (const auto& [key, value] : model.config_echo) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
      throw DomainError("config key or value contains a separator: " + key);
    manifest << "config " << key << ' ' << value << '\n';
  }
  std::vector<char> blobs;
  for (std::size_t u = 0; u < model.units.size(); ++u) {
    const TopUnit& unit = model.units[u];
    append_blob(blobs, manifest, unit.top, std::to_string(u) + " top");
    for (std::size_t leaf = 0; leaf < unit.bottoms.size(); ++leaf)
      for (std::size_t b = 0; b < unit.bottoms[leaf].size(); ++b)
        append_blob(blobs, manifest, unit.bottoms[leaf][b],
                    std::to_string(u) + " leaf " + std::to_string(leaf) + ' ' + std::to_string(b));
  }
  manifest << "end\n";
  const std::string text = manifest.str();
  std::vector<char> out(text.begin(), text.end());
  out.insert(out.end(), blobs.begin(), blobs.end());
  return out;
}

ForestModel deserialize_forest(std::span<const char> bytes) {
  // Manifest: lines up to and including "end\n".
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos == bytes.size()) bad("truncated manifest");
    std::string line(bytes.data() + start, pos - start);
    ++pos;
    return line;
  };

  ForestModel model;
  {
    std::istringstream first(next_line());
    std::string magic;
    int version = 0;
    if (!(first >> magic) || magic != kMagicLine) bad("bad magic");
    if (!(first >> version) || version != kForestVersion) bad("unsupported version");
  }

  struct Entry {
    std::size_t unit;
    bool top;
    std::size_t leaf, b;
    std::uint64_t bytes;
  };
  std::vector<Entry> entries;
  std::string task_name;
  std::uint64_t k = 0, units = 0;
  bool have_d = false, have_units = false, have_combiner = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "task") {
      in >> task_name;
    } else if (key == "k") {
      std::string v;
      in >> v;
      k = to_u64(v, "k");
    } else if (key == "d") {
      std::string v;
      in >> v;
      model.n_features = static_cast<std::uint32_t>(to_u64(v, "d"));
      have_d = true;
    } else if (key == "combiner") {
      std::string v;
      in >> v;
      if (v == "vote") model.combiner = Combiner::vote;
      else if (v == "mean") model.combiner = Combiner::mean;
      else bad("bad combiner");
      have_combiner = true;
    } else if (key == "units") {
      std::string v;
      in >> v;
      units = to_u64(v, "units");
      have_units = true;
    } else if (key == "config") {
      std::string ckey;
      in >> ckey;
      std::string value;
      std::getline(in >> std::ws, value);
      model.config_echo.emplace_back(ckey, value);
    } else if (key == "tree") {
      std::string unit, kind;
      in >> unit >> kind;
      Entry e{to_u64(unit, "unit"), kind == "top", 0, 0, 0};
      std::string s;
      if (kind == "leaf") {
        in >> s;
        e.leaf = to_u64(s, "leaf");
        in >> s;
        e.b = to_u64(s, "tree index");
      } else if (kind != "top") {
        bad("bad tree kind");
      }
      s.clear();
      in >> s;
      e.bytes = to_u64(s, "tree size");
      entries.push_back(e);
    } else {
      bad("unknown manifest key '" + key + "'");
    }
  }
  if (task_name == "classification") {
    if (k < 1) bad("classification without classes");
    model.task = Task::classification(static_cast<std::uint32_t>(k));
  } else if (task_name == "regression") {
    model.task = Task::regression();
  } else {
    bad("bad task");
  }
  if (!have_d || !have_units || !have_combiner) bad("missing manifest field");

  model.units.resize(units);
  for (const Entry& e : entries) {
    if (e.bytes > bytes.size() - pos) bad("truncated tree blob");
    if (e.unit >= units) bad("tree for unknown unit");
    TreeModel tree = deserialize_tree(bytes.subspan(pos, e.bytes));
    pos += e.bytes;
    TopUnit& unit = model.units[e.unit];
    if (e.top) {
      unit.top = std::move(tree);
      continue;
    }
    if (e.leaf >= unit.bottoms.size()) unit.bottoms.resize(e.leaf + 1);
    auto& list = unit.bottoms[e.leaf];
    if (e.b != list.size()) bad("bottom trees out of order");
    list.push_back(std::move(tree));
  }
  if (pos != bytes.size()) bad("trailing bytes after last tree");
  try {
    model.validate();
  } catch (const DomainError& e) {
    bad(e.what());
  }
  return model;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_forest(model);
  const auto tmp = path.string() + ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StorageError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_forest(bytes);
}

}  // namespace canopy
