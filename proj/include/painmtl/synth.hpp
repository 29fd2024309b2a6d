#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "painmtl/dataset.hpp"

namespace painmtl {

struct OscillationBand {
  double center_hz = 0.0;
  std::array<double, 2> amplitude_um{0.0, 0.0};  // uniform range, micromolar
};

// Configuration of the synthetic cohort generator. Tasks are grouped into
// ground-truth clusters; each cluster owns a per-channel evoked-response
// template (signed Gaussian bump). Pain epochs add the template on top of the
// task's baseline oscillations; no-pain spans carry oscillations and noise
// only. The seed fully determines the output.
struct SynthConfig {
  int n_tasks = 40;
  int n_clusters = 3;
  int windows_per_task_per_class = 6;
  int channels = 8;
  double sampling_rate_hz = 5.0;
  std::array<double, 2> response_amplitude_um{0.4, 1.2};
  std::array<double, 2> response_latency_s{3.0, 9.0};
  std::array<double, 2> response_width_s{1.5, 4.0};
  double noise_sigma_um = 0.2;
  std::vector<OscillationBand> oscillation_bands{
      {0.04, {0.1, 0.6}},   // very-low-frequency drift
      {0.10, {0.1, 0.5}},   // Mayer-wave band
  };
  // Per-cluster gain on the oscillation amplitudes, stratified across
  // clusters per band (anti-ranked across band pairs). The default [1, 1]
  // leaves baselines identically distributed in every cluster.
  std::array<double, 2> cluster_oscillation_gain{1.0, 1.0};
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct Cohort {
  std::vector<RecordingSession> sessions;
  std::map<std::string, int> truth;  // task_id -> ground-truth cluster
};

// Reserved window length per epoch; extract_windows with window_s up to this
// value always fits.
inline constexpr double kSynthWindowSpanS = 20.0;
// Onset-to-onset spacing of stimulus epochs (5 s stimulus + 25 s rest).
inline constexpr double kSynthEpochSpacingS = 30.0;

Cohort generate_cohort(const SynthConfig& cfg);

// Ground-truth map: flat JSON object task_id -> cluster index.
void write_truth_map(const std::filesystem::path& path, const std::map<std::string, int>& truth);
std::map<std::string, int> read_truth_map(const std::filesystem::path& path);

}  // namespace painmtl
