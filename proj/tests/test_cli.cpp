#include <doctest.h>

#include <json.hpp>
#include <map>
#include <sstream>

#include "canopy/cli.hpp"
#include "canopy/data.hpp"
#include "canopy/synthetic.hpp"
#include "test_util.hpp"

using namespace canopy;
using testutil::TempDir;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string csv_of(std::size_t n) {
  std::string s = "a,b,label\n";
  for (std::size_t i = 0; i < n; ++i)
    s += std::to_string(i % 7) + "," + std::to_string((i * 3) % 11) + "," +
         std::to_string((i % 7 + (i * 3) % 11) % 3 == 0) + "\n";
  return s;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ingest reports the shape and is deterministic") {
    TempDir dir;
    testutil::write_text(dir / "a.csv", csv_of(100));
    const auto r = run({"ingest", (dir / "a.csv").string(), "--output", (dir / "a.cnpy").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "n_rows=100 d=2 k=2\n");
    run({"ingest", (dir / "a.csv").string(), "--output", (dir / "b.cnpy").string()});
    CHECK(testutil::read_text(dir / "a.cnpy") == testutil::read_text(dir / "b.cnpy"));
  }

  TEST_CASE("ingest of a non-numeric cell exits 1 citing the row") {
    TempDir dir;
    testutil::write_text(dir / "a.csv", "1,2,0\n3,x,1\n");
    const auto r = run({"ingest", (dir / "a.csv").string(), "--output", (dir / "a.cnpy").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("row 2") != std::string::npos);
  }

  TEST_CASE("config errors exit 2 before any work") {
    TempDir dir;
    const auto missing = (dir / "absent.cnpy").string();
    auto r = run({"train", missing, "--lambda", "1.5", "--output", (dir / "m").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("lambda") != std::string::npos);
    r = run({"train", missing, "--trees", "10", "--top-trees", "3", "--output", (dir / "m").string()});
    CHECK(r.code == 2);
    r = run({"train", missing, "--scheme", "magic"});
    CHECK(r.code == 2);
    r = run({"frobnicate"});
    CHECK(r.code == 2);
    r = run({"train", missing, "--output", (dir / "m").string()});
    CHECK(r.code == 3);  // missing dataset is a storage failure
  }

  TEST_CASE("train, predict and evaluate") {
    TempDir dir;
    const SyntheticSpec spec{SyntheticKind::gaussian_mixture, 3000, 4, 3, 0.0, 1};
    generate_to_file(spec, dir / "train.cnpy");
    generate_to_file(SyntheticSpec{SyntheticKind::gaussian_mixture, 500, 4, 3, 0.0, 1}, dir / "test.cnpy");
    const auto model = (dir / "m.forest").string();
    auto r = run({"train", (dir / "train.cnpy").string(), "--scheme", "woody", "--trees", "24", "--top-trees", "6",
                  "--subset-size", "600", "--leaf-bucket-size", "300", "--seed", "3", "--jobs", "2", "--output",
                  model, "--test", (dir / "test.cnpy").string()});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["n_b"] == 4);
    CHECK(report["n_top"] == 6);
    CHECK(report["total_trees"] == 24);
    CHECK(report["n_train"] == 3000);
    for (const char* key : {"sample_top_seconds", "distribute_seconds", "bottom_seconds"})
      CHECK(report[key].get<double>() >= 0.0);
    CHECK(report["sample_top_seconds"].get<double>() + report["distribute_seconds"].get<double>() +
              report["bottom_seconds"].get<double>() <=
          report["total_seconds"].get<double>());
    const double acc = report["accuracy"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);

    // Same config and seed give identical model files.
    const auto again = (dir / "m2.forest").string();
    run({"train", (dir / "train.cnpy").string(), "--trees", "24", "--top-trees", "6", "--subset-size", "600",
         "--leaf-bucket-size", "300", "--seed", "3", "--jobs", "1", "--output", again, "--store", "disk",
         "--scratch-dir", (dir / "scratch").string()});
    CHECK(testutil::read_text(model) == testutil::read_text(again));

    // Evaluate output equals a recomputation from the predictions file.
    r = run({"predict", "--model", model, (dir / "test.cnpy").string(), "--output", (dir / "p.txt").string()});
    REQUIRE(r.code == 0);
    const auto preds = lines(testutil::read_text(dir / "p.txt"));
    const Block test = DatasetHandle::open_binary(dir / "test.cnpy", 100).materialize();
    REQUIRE(preds.size() == test.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += std::stod(preds[i]) == test.y[i];
    char expected[64];
    std::snprintf(expected, sizeof(expected), "accuracy %.6f\n", double(correct) / test.size());
    r = run({"evaluate", "--model", model, (dir / "test.cnpy").string()});
    CHECK(r.code == 0);
    CHECK(r.out == expected);
    CHECK(std::abs(double(correct) / test.size() - acc) < 1e-12);
  }

  TEST_CASE("fully grown single tree memorizes its training set") {
    TempDir dir;
    testutil::write_text(dir / "a.csv", csv_of(300));
    const auto model = (dir / "m").string();
    auto r = run({"train", (dir / "a.csv").string(), "--scheme", "standard", "--trees", "1", "--no-bootstrap",
                  "--max-features", "2", "--output", model});
    REQUIRE(r.code == 0);
    r = run({"evaluate", "--model", model, (dir / "a.csv").string()});
    CHECK(r.out == "accuracy 1.000000\n");
  }

  TEST_CASE("pure training data gives constant predictions") {
    TempDir dir;
    std::string s;
    for (int i = 0; i < 50; ++i) s += std::to_string(i) + "," + std::to_string(i * i % 13) + ",2\n";
    testutil::write_text(dir / "p.csv", s);
    const auto model = (dir / "m").string();
    REQUIRE(run({"train", (dir / "p.csv").string(), "--classes", "3", "--trees", "3", "--output", model}).code == 0);
    testutil::write_text(dir / "q.csv", csv_of(40));
    const auto r = run({"predict", "--model", model, (dir / "q.csv").string(), "--classes", "2"});
    CHECK(r.code == 0);
    for (const auto& l : lines(r.out)) CHECK(l == "2");
  }

  TEST_CASE("feature-count mismatch exits 2") {
    TempDir dir;
    testutil::write_text(dir / "a.csv", csv_of(60));
    const auto model = (dir / "m").string();
    REQUIRE(run({"train", (dir / "a.csv").string(), "--trees", "2", "--output", model}).code == 0);
    testutil::write_text(dir / "b.csv", "1,2,3,0\n4,5,6,1\n");
    CHECK(run({"predict", "--model", model, (dir / "b.csv").string()}).code == 2);
    CHECK(run({"evaluate", "--model", model, (dir / "b.csv").string()}).code == 2);
  }

  TEST_CASE("generate writes each kind") {
    TempDir dir;
    for (const char* kind : {"rare-class", "skewed", "gaussian-mixture"}) {
      const auto path = (dir / (std::string(kind) + ".cnpy")).string();
      const auto r = run({"generate", "--generate", kind, "--rows", "500", "--features", "3", "--seed", "2",
                          "--output", path});
      CHECK(r.code == 0);
      CHECK(DatasetHandle::open_binary(path, 100).n_rows() == 500);
    }
    const auto csv = (dir / "g.csv").string();
    CHECK(run({"generate", "--generate", "skewed", "--rows", "20", "--output", csv, "--format", "csv"}).code == 0);
    CHECK(lines(testutil::read_text(csv)).size() == 21);
    CHECK(run({"generate", "--generate", "nope", "--output", csv}).code == 2);
  }

  TEST_CASE("benchmark grid: cardinality, fixed header, failing cells recorded") {
    TempDir dir;
    generate_to_file(SyntheticSpec{SyntheticKind::rare_class, 2500, 3, 3, 0.02, 4}, dir / "d.cnpy");
    const auto out = (dir / "b.csv").string();
    const auto r = run({"benchmark", (dir / "d.cnpy").string(), "--schemes", "woody,subsets", "--sizes", "500,1000",
                        "--seeds", "1,2", "--trees", "4", "--top-trees", "2", "--subset-size", "200",
                        "--leaf-bucket-size", "100", "--baseline-subset-size", "200", "--jobs", "1", "--output", out});
    REQUIRE(r.code == 0);
    const auto rows = lines(testutil::read_text(out));
    REQUIRE(rows.size() == 9);
    std::string header;
    for (const auto& c : cli::benchmark_columns()) header += (header.empty() ? "" : ",") + c;
    CHECK(rows[0] == header);
    CHECK(header ==
          "scheme,n_train,seed,total_trees,n_top,n_b,sample_top_seconds,distribute_seconds,bottom_seconds,"
          "total_seconds,peak_resident_rows,accuracy,mse,status");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].size() - 3) == ",ok");

    // A cell larger than the training split fails on its own.
    const auto bad = run({"benchmark", (dir / "d.cnpy").string(), "--sizes", "100,99999", "--seeds", "1",
                          "--trees", "2", "--subset-size", "50", "--jobs", "1"});
    CHECK(bad.code == 0);
    const auto bad_rows = lines(bad.out);
    REQUIRE(bad_rows.size() == 3);
    CHECK(bad_rows[1].find(",ok") != std::string::npos);
    CHECK(bad_rows[2].find("error:") != std::string::npos);
  }

  TEST_CASE("woody accuracy does not fall as the training size grows") {
    TempDir dir;
    generate_to_file(SyntheticSpec{SyntheticKind::rare_class, 30000, 4, 3, 0.005, 12}, dir / "d.cnpy");
    const auto r = run({"benchmark", (dir / "d.cnpy").string(), "--schemes", "woody", "--sizes", "500,4000,20000",
                        "--seeds", "1,2,3", "--trees", "8", "--top-trees", "2", "--subset-size", "400",
                        "--leaf-bucket-size", "1000", "--jobs", "1"});
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 10);
    std::map<long, double> mean;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::vector<std::string> cells;
      std::stringstream in(rows[i]);
      for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
      mean[std::stol(cells[1])] += std::stod(cells[11]) / 3.0;
    }
    // Seed noise on a 6000-row test split is well under one point.
    CHECK(mean[4000] >= mean[500] - 0.01);
    CHECK(mean[20000] >= mean[4000] - 0.01);
    CHECK(mean[20000] > mean[500]);
  }

  TEST_CASE("benchmark csv is deterministic apart from timing columns") {
    TempDir dir;
    generate_to_file(SyntheticSpec{SyntheticKind::gaussian_mixture, 1500, 3, 2, 0.0, 4}, dir / "d.cnpy");
    auto strip = [](const std::string& text) {
      std::vector<std::string> out;
      for (const auto& row : lines(text)) {
        std::vector<std::string> cells;
        std::stringstream in(row);
        for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
        for (int i : {6, 7, 8, 9}) cells[i] = "";
        std::string joined;
        for (const auto& c : cells) joined += c + ",";
        out.push_back(joined);
      }
      return out;
    };
    const std::vector<std::string> args{"benchmark", (dir / "d.cnpy").string(), "--seeds", "5,6", "--trees", "3",
                                        "--subset-size", "300", "--leaf-bucket-size", "200", "--jobs", "2"};
    CHECK(strip(run(args).out) == strip(run(args).out));
  }
}
