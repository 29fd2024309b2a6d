#include "painmtl/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "painmtl/errors.hpp"

namespace painmtl {

void FeatureConfig::validate() const {
  if (!(window_s > 0.0)) throw ConfigError("features.window_s must be positive");
  if (n_no_pain_per_task < 0) throw ConfigError("features.n_no_pain_per_task must be non-negative");
  if (!(w0 > 0.0)) throw ConfigError("features.w0 must be positive");
  if (voices_per_octave < 1) throw ConfigError("features.voices_per_octave must be at least 1");
  if (!(f_min_hz > 0.0) || !(f_min_hz < f_max_hz))
    throw ConfigError("features requires 0 < f_min_hz < f_max_hz");
  if (bands.empty()) throw ConfigError("features.bands must be non-empty");
  for (const auto& b : bands)
    if (!(b.f_low_hz > 0.0) || !(b.f_low_hz < b.f_high_hz))
      throw ConfigError("band '" + b.name + "' requires 0 < f_low_hz < f_high_hz");
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
}

template <typename T>
void read_into(const json& j, const char* key, T& value, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + path + "." + key + "' has the wrong type");
  }
}

void read_range(const json& j, const char* key, std::array<double, 2>& value, const std::string& path) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("config key '" + path + "." + key + "' must be a [lo, hi] pair");
  value = {v[0].get<double>(), v[1].get<double>()};
}

void parse_synth(const json& j, SynthConfig& cfg) {
  reject_unknown(j, "synth",
                 {"n_tasks", "n_clusters", "windows_per_task_per_class", "channels",
                  "sampling_rate_hz", "response_amplitude_um", "response_latency_s",
                  "response_width_s", "noise_sigma_um", "oscillation_bands"});
  read_into(j, "n_tasks", cfg.n_tasks, "synth");
  read_into(j, "n_clusters", cfg.n_clusters, "synth");
  read_into(j, "windows_per_task_per_class", cfg.windows_per_task_per_class, "synth");
  read_into(j, "channels", cfg.channels, "synth");
  read_into(j, "sampling_rate_hz", cfg.sampling_rate_hz, "synth");
  read_range(j, "response_amplitude_um", cfg.response_amplitude_um, "synth");
  read_range(j, "response_latency_s", cfg.response_latency_s, "synth");
  read_range(j, "response_width_s", cfg.response_width_s, "synth");
  read_into(j, "noise_sigma_um", cfg.noise_sigma_um, "synth");
  if (j.contains("oscillation_bands")) {
    cfg.oscillation_bands.clear();
    for (const auto& b : j.at("oscillation_bands")) {
      reject_unknown(b, "synth.oscillation_bands[]", {"center_hz", "amplitude_um"});
      OscillationBand band;
      read_into(b, "center_hz", band.center_hz, "synth.oscillation_bands[]");
      read_range(b, "amplitude_um", band.amplitude_um, "synth.oscillation_bands[]");
      cfg.oscillation_bands.push_back(band);
    }
  }
}

void parse_features(const json& j, FeatureConfig& cfg) {
  reject_unknown(j, "features",
                 {"window_s", "n_no_pain_per_task", "w0", "voices_per_octave", "f_min_hz",
                  "f_max_hz", "bands"});
  read_into(j, "window_s", cfg.window_s, "features");
  read_into(j, "n_no_pain_per_task", cfg.n_no_pain_per_task, "features");
  read_into(j, "w0", cfg.w0, "features");
  read_into(j, "voices_per_octave", cfg.voices_per_octave, "features");
  read_into(j, "f_min_hz", cfg.f_min_hz, "features");
  read_into(j, "f_max_hz", cfg.f_max_hz, "features");
  if (j.contains("bands")) {
    cfg.bands.clear();
    for (const auto& b : j.at("bands")) {
      reject_unknown(b, "features.bands[]", {"name", "f_low_hz", "f_high_hz"});
      BandDefinition band;
      read_into(b, "name", band.name, "features.bands[]");
      read_into(b, "f_low_hz", band.f_low_hz, "features.bands[]");
      read_into(b, "f_high_hz", band.f_high_hz, "features.bands[]");
      cfg.bands.push_back(band);
    }
  }
}

void parse_hblr(const json& j, HblrHyperParams& hp) {
  reject_unknown(j, "hblr", {"k", "tau10", "tau20", "sigma2", "max_sweeps", "rel_tol", "cold_start"});
  read_into(j, "k", hp.k, "hblr");
  read_into(j, "tau10", hp.tau10, "hblr");
  read_into(j, "tau20", hp.tau20, "hblr");
  read_into(j, "sigma2", hp.sigma2, "hblr");
  read_into(j, "max_sweeps", hp.max_sweeps, "hblr");
  read_into(j, "rel_tol", hp.rel_tol, "hblr");
  read_into(j, "cold_start", hp.cold_start, "hblr");
}

void parse_baselines(const json& j, BaselineGrids& grids) {
  reject_unknown(j, "baselines",
                 {"logreg_lambda_grid", "svm_c_grid", "svm_gamma_scale_grid", "inner_folds"});
  read_into(j, "logreg_lambda_grid", grids.logreg_lambda_grid, "baselines");
  read_into(j, "svm_c_grid", grids.svm_c_grid, "baselines");
  read_into(j, "svm_gamma_scale_grid", grids.svm_gamma_scale_grid, "baselines");
  read_into(j, "inner_folds", grids.inner_folds, "baselines");
}

void parse_eval(const json& j, EvalConfig& cfg) {
  reject_unknown(j, "eval", {"folds", "balance", "seeds"});
  read_into(j, "folds", cfg.folds, "eval");
  read_into(j, "balance", cfg.balance, "eval");
  read_into(j, "seeds", cfg.seeds, "eval");
}

void parse_paths(const json& j, PathsConfig& cfg) {
  reject_unknown(j, "paths", {"sessions", "truth", "features", "model", "report"});
  read_into(j, "sessions", cfg.sessions, "paths");
  read_into(j, "truth", cfg.truth, "paths");
  read_into(j, "features", cfg.features, "paths");
  read_into(j, "model", cfg.model, "paths");
  read_into(j, "report", cfg.report, "paths");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + origin + ": invalid JSON");
  if (!j.is_object()) throw ConfigError("config " + origin + ": expected a JSON object");
  reject_unknown(j, "", {"seed", "synth", "features", "hblr", "baselines", "eval", "paths"});

  RunConfig cfg;
  read_into(j, "seed", cfg.seed, "");
  if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
  if (j.contains("features")) parse_features(j.at("features"), cfg.features);
  if (j.contains("hblr")) parse_hblr(j.at("hblr"), cfg.hblr);
  if (j.contains("baselines")) parse_baselines(j.at("baselines"), cfg.baselines);
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  if (j.contains("paths")) parse_paths(j.at("paths"), cfg.paths);

  cfg.synth.seed = cfg.seed;
  cfg.synth.validate();
  cfg.features.validate();
  cfg.hblr.validate();
  if (cfg.eval.folds < 2) throw ConfigError("eval.folds must be at least 2");
  if (cfg.baselines.inner_folds < 2) throw ConfigError("baselines.inner_folds must be at least 2");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, "'" + path.string() + "'");
}

}  // namespace painmtl
