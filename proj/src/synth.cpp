#include "painmtl/synth.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/rng.hpp"

namespace painmtl {

namespace {

void check_range(const std::array<double, 2>& r, const char* name) {
  if (!(r[0] <= r[1])) throw ConfigError(std::string(name) + " range is inverted");
  if (!std::isfinite(r[0]) || !std::isfinite(r[1]))
    throw ConfigError(std::string(name) + " range is not finite");
}

struct ClusterTemplate {
  double latency_s = 0.0;
  double width_s = 0.0;
  std::vector<double> amplitude;  // per channel, signed
  std::vector<double> band_gain;  // per oscillation band
};

std::string make_task_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "task%03d", index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_tasks <= 0) throw ConfigError("n_tasks must be positive");
  if (n_clusters <= 0) throw ConfigError("n_clusters must be positive");
  if (n_clusters > n_tasks) throw ConfigError("n_clusters cannot exceed n_tasks");
  if (windows_per_task_per_class <= 0) throw ConfigError("windows_per_task_per_class must be positive");
  if (channels <= 0) throw ConfigError("channels must be positive");
  if (!(sampling_rate_hz > 1.0)) throw ConfigError("sampling_rate_hz must exceed 1 Hz");
  if (!(noise_sigma_um >= 0.0)) throw ConfigError("noise_sigma_um must be non-negative");
  check_range(response_amplitude_um, "response_amplitude_um");
  check_range(response_latency_s, "response_latency_s");
  check_range(response_width_s, "response_width_s");
  if (!(response_amplitude_um[0] >= 0.0)) throw ConfigError("response_amplitude_um must be non-negative");
  if (!(response_width_s[0] > 0.0)) throw ConfigError("response_width_s must be positive");
  if (response_latency_s[1] > kSynthWindowSpanS)
    throw ConfigError("response_latency_s must stay inside the 20 s analysis window");
  if (oscillation_bands.empty()) throw ConfigError("at least one oscillation band is required");
  for (const auto& band : oscillation_bands) {
    if (!(band.center_hz > 0.0)) throw ConfigError("oscillation band center must be positive");
    check_range(band.amplitude_um, "oscillation band amplitude");
  }
}

Cohort generate_cohort(const SynthConfig& cfg) {
  cfg.validate();

  const double fs = cfg.sampling_rate_hz;
  // Layout: resting baseline long enough for the no-pain draws, then one
  // stimulus epoch per pain window, then a short tail.
  const double baseline_span_s = (cfg.windows_per_task_per_class + 1) * kSynthWindowSpanS;
  const double duration_s =
      baseline_span_s + cfg.windows_per_task_per_class * kSynthEpochSpacingS + 10.0;
  const int n_samples = static_cast<int>(std::llround(duration_s * fs));

  // Cluster assignment: the first n_clusters tasks pin one cluster each so no
  // cluster is empty; the rest draw uniformly.
  Rng assign_rng(derive_seed(cfg.seed, "synth/assign"));
  std::vector<int> cluster_of(cfg.n_tasks);
  for (int m = 0; m < cfg.n_tasks; ++m)
    cluster_of[m] = m < cfg.n_clusters
                        ? m
                        : static_cast<int>(assign_rng.integer(static_cast<std::uint64_t>(cfg.n_clusters)));

  // Latency and width draws are stratified across their ranges (one stratum
  // per cluster, in seeded shuffled order) so that configured clusters carry
  // distinguishable response shapes. Point ranges collapse to the point.
  std::vector<int> latency_stratum(cfg.n_clusters), width_stratum(cfg.n_clusters),
      gain_stratum(cfg.n_clusters);
  {
    Rng rng(derive_seed(cfg.seed, "synth/strata"));
    for (int k = 0; k < cfg.n_clusters; ++k)
      latency_stratum[k] = width_stratum[k] = gain_stratum[k] = k;
    rng.shuffle(latency_stratum);
    rng.shuffle(width_stratum);
    rng.shuffle(gain_stratum);
  }
  auto stratified = [&](Rng& rng, const std::array<double, 2>& range, int stratum) {
    return range[0] + (stratum + rng.uniform()) * (range[1] - range[0]) / cfg.n_clusters;
  };

  std::vector<ClusterTemplate> templates(cfg.n_clusters);
  for (int k = 0; k < cfg.n_clusters; ++k) {
    Rng rng(derive_seed(cfg.seed, "synth/cluster/" + std::to_string(k)));
    auto& tpl = templates[k];
    tpl.latency_s = stratified(rng, cfg.response_latency_s, latency_stratum[k]);
    tpl.width_s = stratified(rng, cfg.response_width_s, width_stratum[k]);
    tpl.amplitude.resize(cfg.channels);
    for (int c = 0; c < cfg.channels; ++c) {
      double a = rng.uniform(cfg.response_amplitude_um[0], cfg.response_amplitude_um[1]);
      tpl.amplitude[c] = rng.sign() * a;
    }
    tpl.band_gain.resize(cfg.oscillation_bands.size());
    for (std::size_t b = 0; b < cfg.oscillation_bands.size(); ++b) {
      // anti-ranked across alternating bands: a cluster with a strong gain in
      // one band gets a weak gain in the next
      const int stratum = b % 2 == 0 ? gain_stratum[k] : cfg.n_clusters - 1 - gain_stratum[k];
      tpl.band_gain[b] = stratified(rng, cfg.cluster_oscillation_gain, stratum);
    }
  }

  Cohort cohort;
  cohort.sessions.reserve(cfg.n_tasks);
  for (int m = 0; m < cfg.n_tasks; ++m) {
    const std::string task_id = make_task_id(m);
    const ClusterTemplate& tpl = templates[cluster_of[m]];
    cohort.truth[task_id] = cluster_of[m];

    RecordingSession s;
    s.task_id = task_id;
    s.sampling_rate = fs;
    s.duration_s = duration_s;
    s.onsets.push_back({0.0, OnsetKind::baseline_marker});
    std::vector<double> onset_times;
    for (int e = 0; e < cfg.windows_per_task_per_class; ++e) {
      double t = baseline_span_s + e * kSynthEpochSpacingS;
      onset_times.push_back(t);
      s.onsets.push_back({t, OnsetKind::noxious});
    }

    Rng rng(derive_seed(cfg.seed, "synth/task/" + task_id));
    s.channels.assign(cfg.channels, std::vector<double>(n_samples, 0.0));
    for (int c = 0; c < cfg.channels; ++c) {
      auto& x = s.channels[c];
      for (const auto& band : cfg.oscillation_bands) {
        const double amp = rng.uniform(band.amplitude_um[0], band.amplitude_um[1]);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double w = 2.0 * M_PI * band.center_hz;
        for (int t = 0; t < n_samples; ++t) x[t] += amp * std::sin(w * (t / fs) + phase);
      }
      for (int t = 0; t < n_samples; ++t) x[t] += rng.normal(0.0, cfg.noise_sigma_um);

      const double inv_two_w2 = 1.0 / (2.0 * tpl.width_s * tpl.width_s);
      for (double onset : onset_times) {
        // causal response: nothing before the stimulus onset
        const double peak_t = onset + tpl.latency_s;
        const int lo = std::max(static_cast<int>(std::llround(onset * fs)),
                                static_cast<int>(std::floor((peak_t - 6.0 * tpl.width_s) * fs)));
        const int hi = std::min(n_samples - 1, static_cast<int>(std::ceil((peak_t + 6.0 * tpl.width_s) * fs)));
        for (int t = lo; t <= hi; ++t) {
          const double d = t / fs - peak_t;
          x[t] += tpl.amplitude[c] * std::exp(-d * d * inv_two_w2);
        }
      }
    }
    cohort.sessions.push_back(std::move(s));
  }
  return cohort;
}

void write_truth_map(const std::filesystem::path& path, const std::map<std::string, int>& truth) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << nlohmann::json(truth).dump(2) << '\n';
}

std::map<std::string, int> read_truth_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("truth map '" + path.string() + "': invalid JSON object");
  std::map<std::string, int> truth;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer())
      throw ParseError("truth map '" + path.string() + "': value for '" + it.key() + "' is not an integer");
    truth[it.key()] = it.value().get<int>();
  }
  return truth;
}

}  // namespace painmtl
