#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "painmtl/dataset.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/synth.hpp"

using namespace painmtl;

namespace {

std::string serialize(const Cohort& cohort) {
  const auto path = std::filesystem::temp_directory_path() / "painmtl_cohort_tmp.jsonl";
  write_sessions(path, cohort.sessions);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::filesystem::remove(path);
  return ss.str();
}

}  // namespace

TEST_CASE("same config and seed give byte-identical cohorts") {
  SynthConfig cfg;
  cfg.n_tasks = 6;
  cfg.seed = 2024;
  const std::string a = serialize(generate_cohort(cfg));
  const std::string b = serialize(generate_cohort(cfg));
  CHECK(a == b);
  cfg.seed = 2025;
  CHECK(a != serialize(generate_cohort(cfg)));
}

TEST_CASE("40 tasks over 3 clusters form three non-empty groups") {
  SynthConfig cfg;
  cfg.seed = 11;
  const Cohort cohort = generate_cohort(cfg);
  REQUIRE(cohort.truth.size() == 40);
  std::set<int> used;
  int counts[3] = {0, 0, 0};
  for (const auto& [task, cluster] : cohort.truth) {
    REQUIRE(cluster >= 0);
    REQUIRE(cluster < 3);
    used.insert(cluster);
    ++counts[cluster];
  }
  CHECK(used.size() == 3);
  for (int c : counts) CHECK(c > 0);
}

TEST_CASE("zero noise with a point amplitude leaves a bump of exactly that height") {
  SynthConfig cfg;
  cfg.n_tasks = 3;
  cfg.n_clusters = 1;
  cfg.channels = 2;
  cfg.noise_sigma_um = 0.0;
  cfg.response_amplitude_um = {0.9, 0.9};
  cfg.response_latency_s = {6.0, 6.0};  // lands on the 5 Hz sample grid
  cfg.response_width_s = {2.0, 2.0};
  cfg.seed = 3;
  const Cohort with_response = generate_cohort(cfg);

  SynthConfig flat = cfg;
  flat.response_amplitude_um = {0.0, 0.0};
  const Cohort baseline_only = generate_cohort(flat);

  for (std::size_t s = 0; s < with_response.sessions.size(); ++s) {
    const auto& a = with_response.sessions[s];
    const auto& b = baseline_only.sessions[s];
    const double fs = a.sampling_rate;
    for (int c = 0; c < a.n_channels(); ++c) {
      double peak = 0.0;
      int peak_at = -1;
      for (int t = 0; t < a.n_samples(); ++t) {
        const double dev = std::abs(a.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)] -
                                    b.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]);
        if (dev > peak) {
          peak = dev;
          peak_at = t;
        }
      }
      CHECK(peak == doctest::Approx(0.9).epsilon(1e-12));
      // peak sits at onset + latency for some noxious onset
      bool at_latency = false;
      for (const auto& onset : a.onsets) {
        if (onset.kind != OnsetKind::noxious) continue;
        if (peak_at == static_cast<int>((onset.time_s + 6.0) * fs)) at_latency = true;
      }
      CHECK(at_latency);
    }
  }
}

TEST_CASE("zero-noise cohorts separate pain from no-pain by peak deviation") {
  SynthConfig cfg;
  cfg.n_tasks = 2;
  cfg.n_clusters = 2;
  cfg.channels = 3;
  cfg.noise_sigma_um = 0.0;
  cfg.seed = 8;
  const Cohort cohort = generate_cohort(cfg);
  SynthConfig flat = cfg;
  flat.response_amplitude_um = {0.0, 0.0};
  const Cohort baseline_only = generate_cohort(flat);

  for (std::size_t s = 0; s < cohort.sessions.size(); ++s) {
    const auto windows = extract_windows(cohort.sessions[s], 20.0, 6, 5);
    const auto flat_windows = extract_windows(baseline_only.sessions[s], 20.0, 6, 5);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const double peak = (windows[w].samples - flat_windows[w].samples).cwiseAbs().maxCoeff();
      if (windows[w].label == 1)
        CHECK(peak > 0.2);
      else
        CHECK(peak == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("generated sessions validate and support the default window") {
  SynthConfig cfg;
  cfg.n_tasks = 4;
  cfg.seed = 21;
  const Cohort cohort = generate_cohort(cfg);
  for (const auto& s : cohort.sessions) {
    s.validate();
    const auto windows = extract_windows(s, 20.0, cfg.windows_per_task_per_class, 1);
    CHECK(static_cast<int>(windows.size()) == 2 * cfg.windows_per_task_per_class);
  }
}

TEST_CASE("invalid synth configs are rejected") {
  SynthConfig cfg;
  cfg.n_tasks = 0;
  CHECK_THROWS_AS(generate_cohort(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.n_clusters = 50;
  cfg.n_tasks = 10;
  CHECK_THROWS_AS(generate_cohort(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.sampling_rate_hz = 0.5;
  CHECK_THROWS_AS(generate_cohort(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.response_amplitude_um = {1.0, 0.5};
  CHECK_THROWS_AS(generate_cohort(cfg), ConfigError);
}

TEST_CASE("truth map round-trips") {
  const auto path = std::filesystem::temp_directory_path() / "painmtl_truth_rt.json";
  std::map<std::string, int> truth{{"task000", 0}, {"task001", 2}};
  write_truth_map(path, truth);
  CHECK(read_truth_map(path) == truth);
  std::filesystem::remove(path);
}
