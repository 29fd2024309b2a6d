#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "painmtl/eval.hpp"
#include "painmtl/features.hpp"
#include "painmtl/hblr.hpp"
#include "painmtl/synth.hpp"

namespace painmtl {

struct FeatureConfig {
  double window_s = 20.0;
  int n_no_pain_per_task = 6;
  double w0 = 6.0;
  int voices_per_octave = 10;
  double f_min_hz = 0.01;
  double f_max_hz = 0.5;
  std::vector<BandDefinition> bands = default_bands();

  void validate() const;
};

struct BaselineGrids {
  std::vector<double> logreg_lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::vector<double> svm_c_grid{0.1, 1.0, 10.0};
  std::vector<double> svm_gamma_scale_grid{0.1, 1.0, 10.0};  // gamma = scale / D
  int inner_folds = 5;
};

struct EvalConfig {
  int folds = 10;
  bool balance = true;
  std::vector<std::uint64_t> seeds{101, 102, 103, 104, 105};  // multi-seed experiment runs
};

struct PathsConfig {
  std::string sessions = "sessions.jsonl";
  std::string truth = "truth.json";
  std::string features = "features.csv";
  std::string model = "model.json";
  std::string report = "report.json";
};

// Every field has a default; a config file may set any subset. Unknown keys
// are rejected with their full path.
struct RunConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  FeatureConfig features;
  HblrHyperParams hblr;
  BaselineGrids baselines;
  EvalConfig eval;
  PathsConfig paths;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace painmtl
