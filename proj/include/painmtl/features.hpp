#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "painmtl/cwt.hpp"
#include "painmtl/dataset.hpp"

namespace painmtl {

struct BandDefinition {
  std::string name;
  double f_low_hz = 0.0;
  double f_high_hz = 0.0;
};

// VLFO 0.01-0.08 Hz, LFO 0.08-0.15 Hz.
std::vector<BandDefinition> default_bands();

// Five descriptors of |T| over one band. A scale row is in-band when its
// equivalent frequency lies in [f_low, f_high]. mean/max/std run over the
// whole band x time block (population std). m(b) is the in-band scale average
// of |T(a,b)|; peak_location is the argmax time of m(b) normalized to [0, 1]
// by the window duration (earliest index on ties), slope is the OLS slope of
// m(b) against b in seconds.
struct BandFeatures {
  double mean = 0.0;
  double max = 0.0;
  double stddev = 0.0;
  double peak_location = 0.0;
  double slope = 0.0;
};

BandFeatures band_features(const Scalogram& scalogram, const BandDefinition& band);

struct FeatureVector {
  std::string task_id;
  int label = 0;
  Eigen::VectorXd values;
};

// Per channel and band, in band order: mean, max, std, peak location, slope.
// Channel-major layout: entry 5*(n_bands*c + b) + f. With the two default
// bands this is 10 features per channel, D = 80 for the 8-channel montage.
FeatureVector extract_features(const LabeledWindow& window, const std::vector<BandDefinition>& bands,
                               const ScaleGrid& grid, const MorletParams& params);

// Same extraction with the wavelet plan reused across windows that share a
// (length, sampling rate) pair. Not thread-safe; one extractor per thread.
class FeatureExtractor {
 public:
  FeatureExtractor(std::vector<BandDefinition> bands, ScaleGrid grid, MorletParams params);

  FeatureVector operator()(const LabeledWindow& window);

 private:
  std::vector<BandDefinition> bands_;
  ScaleGrid grid_;
  MorletParams params_;
  std::map<std::pair<int, double>, WaveletPlan> plans_;
};

// Per-feature z-score statistics fitted on training data only.
struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored at 1e-12
};

NormalizationStats fit_normalizer(const Eigen::MatrixXd& rows);
NormalizationStats fit_normalizer(const std::vector<FeatureVector>& train);
Eigen::VectorXd apply_normalizer(const NormalizationStats& stats, const Eigen::VectorXd& v);
Eigen::MatrixXd apply_normalizer(const NormalizationStats& stats, const Eigen::MatrixXd& rows);

// Row-oriented feature container mirroring the CSV layout.
struct FeatureTable {
  std::vector<std::string> task_id;  // per row
  std::vector<int> label;            // per row
  Eigen::MatrixXd x;                 // rows x D

  int n_rows() const { return static_cast<int>(task_id.size()); }
  int dimension() const { return static_cast<int>(x.cols()); }
};

FeatureTable to_table(const std::vector<FeatureVector>& rows);

// Features file: CSV with mandatory header task_id,label,f_000..f_{D-1}.
void write_features_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_features_csv(const std::filesystem::path& path);

struct TaskFeatureSet {
  std::string task_id;
  Eigen::MatrixXd x;   // N_m x D
  Eigen::VectorXi y;   // 0/1
};

// Groups rows by task in order of first appearance.
std::vector<TaskFeatureSet> group_by_task(const FeatureTable& table);

}  // namespace painmtl
