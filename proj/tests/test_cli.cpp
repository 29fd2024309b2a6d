#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "painmtl/config.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/text.hpp"

using namespace painmtl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("painmtl_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(PAINMTL_CLI_PATH) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null 2>&1" : " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth twice with one seed writes byte-identical files") {
  TempDir dir;
  const std::string base = "synth --seed 7 --n-tasks 4 ";
  REQUIRE(run_cli(base + "--out " + dir.file("a.jsonl") + " --truth-out " + dir.file("a.json")) == 0);
  REQUIRE(run_cli(base + "--out " + dir.file("b.jsonl") + " --truth-out " + dir.file("b.json")) == 0);
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
}

TEST_CASE("synth rejects zero tasks with exit status 2") {
  TempDir dir;
  CHECK(run_cli("synth --n-tasks 0 --out " + dir.file("x.jsonl") + " --truth-out " + dir.file("x.json")) == 2);
}

TEST_CASE("extract produces task_id + label + 10 x channels columns") {
  TempDir dir;
  REQUIRE(run_cli("synth --seed 3 --n-tasks 3 --channels 8 --out " + dir.file("s.jsonl") +
                  " --truth-out " + dir.file("t.json")) == 0);
  REQUIRE(run_cli("extract --seed 3 --in " + dir.file("s.jsonl") + " --out " + dir.file("f.csv")) == 0);
  std::ifstream in(dir.file("f.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(split_csv_line(header).size() == 82);
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3 * 12);
}

TEST_CASE("extract on a missing file exits with status 2") {
  TempDir dir;
  CHECK(run_cli("extract --in " + dir.file("absent.jsonl") + " --out " + dir.file("f.csv")) == 2);
}

TEST_CASE("train/eval/clusters pipeline round-trips with deterministic outputs") {
  TempDir dir;
  REQUIRE(run_cli("synth --seed 11 --n-tasks 6 --channels 4 --out " + dir.file("s.jsonl") +
                  " --truth-out " + dir.file("t.json")) == 0);
  REQUIRE(run_cli("extract --seed 11 --in " + dir.file("s.jsonl") + " --out " + dir.file("f.csv")) == 0);

  // hblr training writes a model with K=3
  REQUIRE(run_cli("train --seed 11 --in " + dir.file("f.csv") +
                  " --model hblr --k 3 --max-sweeps 60 --out " + dir.file("m.json")) == 0);
  CHECK(slurp(dir.file("m.json")).find("\"k\": 3") != std::string::npos);

  // clusters exports memberships whose rows sum to one after the round-trip
  REQUIRE(run_cli("clusters --model " + dir.file("m.json") + " --out " + dir.file("phi.csv") +
                  " --truth " + dir.file("t.json"),
                  dir.file("clusters.out")) == 0);
  {
    std::ifstream in(dir.file("phi.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(split_csv_line(header).size() == 4);  // task_id + 3 clusters
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++rows;
      const auto fields = split_csv_line(line);
      REQUIRE(fields.size() == 4);
      double sum = 0.0;
      for (int c = 1; c < 4; ++c) sum += parse_double(fields[static_cast<std::size_t>(c)], "phi");
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(rows == 6);
  }
  CHECK(slurp(dir.file("clusters.out")).find("ARI ") != std::string::npos);

  // logreg-l2 eval, run twice, must be byte-identical
  const std::string eval_cmd = "eval --seed 11 --in " + dir.file("f.csv") +
                               " --model logreg-l2 --lambda 0.1 --folds 5 ";
  REQUIRE(run_cli(eval_cmd + "--out " + dir.file("r1.json") + " --csv-out " + dir.file("r1.csv"),
                  dir.file("eval1.out")) == 0);
  REQUIRE(run_cli(eval_cmd + "--out " + dir.file("r2.json") + " --csv-out " + dir.file("r2.csv")) == 0);
  CHECK(slurp(dir.file("r1.json")) == slurp(dir.file("r2.json")));
  CHECK(slurp(dir.file("r1.csv")) == slurp(dir.file("r2.csv")));

  // the aggregate table carries the four metric columns
  const std::string table = slurp(dir.file("eval1.out"));
  CHECK(table.find("accuracy") != std::string::npos);
  CHECK(table.find("precision") != std::string::npos);
  CHECK(table.find("recall") != std::string::npos);
  CHECK(table.find("f1") != std::string::npos);
}

TEST_CASE("eval and train reject bad hyperparameters with exit status 2") {
  TempDir dir;
  REQUIRE(run_cli("synth --seed 5 --n-tasks 3 --channels 2 --out " + dir.file("s.jsonl") +
                  " --truth-out " + dir.file("t.json")) == 0);
  REQUIRE(run_cli("extract --seed 5 --in " + dir.file("s.jsonl") + " --out " + dir.file("f.csv")) == 0);
  CHECK(run_cli("train --in " + dir.file("f.csv") + " --model hblr --k 0 --out " + dir.file("m.json")) == 2);
  CHECK(run_cli("eval --in " + dir.file("f.csv") + " --model hblr --folds 1 --out " + dir.file("r.json")) == 2);
  CHECK(run_cli("eval --in " + dir.file("f.csv") + " --model nonsense --out " + dir.file("r.json")) == 2);
}

TEST_CASE("clusters rejects a non-hblr model with exit status 2") {
  TempDir dir;
  REQUIRE(run_cli("synth --seed 6 --n-tasks 3 --channels 2 --out " + dir.file("s.jsonl") +
                  " --truth-out " + dir.file("t.json")) == 0);
  REQUIRE(run_cli("extract --seed 6 --in " + dir.file("s.jsonl") + " --out " + dir.file("f.csv")) == 0);
  REQUIRE(run_cli("train --in " + dir.file("f.csv") + " --model logreg-l2 --out " + dir.file("lin.json")) == 0);
  CHECK(run_cli("clusters --model " + dir.file("lin.json") + " --out " + dir.file("phi.csv")) == 2);
}

TEST_CASE("config files drive the pipeline and unknown keys are rejected") {
  TempDir dir;
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"seed": 21, "synth": {"n_tasks": 3, "channels": 2}, "features": {"window_s": 20.0}})";
  }
  REQUIRE(run_cli("synth --config " + dir.file("cfg.json") + " --out " + dir.file("s.jsonl") +
                  " --truth-out " + dir.file("t.json")) == 0);
  const auto text = slurp(dir.file("s.jsonl"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);

  {
    std::ofstream out(dir.file("bad.json"));
    out << R"({"seed": 21, "synth": {"n_tasks": 3, "wrong_key": 1}})";
  }
  CHECK(run_cli("synth --config " + dir.file("bad.json") + " --out " + dir.file("s2.jsonl") +
                " --truth-out " + dir.file("t2.json")) == 2);
}

TEST_CASE("run config parsing applies defaults and rejects unknown keys") {
  const RunConfig cfg = parse_run_config(R"({"seed": 5, "hblr": {"k": 7}})", "test");
  CHECK(cfg.seed == 5);
  CHECK(cfg.synth.seed == 5);
  CHECK(cfg.hblr.k == 7);
  CHECK(cfg.hblr.tau10 == 0.01);
  CHECK(cfg.hblr.tau20 == 0.1);
  CHECK(cfg.eval.folds == 10);
  CHECK(cfg.features.bands.size() == 2);
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config(R"({"sed": 5})", "test")),
                       doctest::Contains("sed"), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_run_config(R"({"eval": {"folds": 1}})", "test")), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_run_config("{nonsense", "test")), ConfigError);
}
