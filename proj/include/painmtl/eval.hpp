#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "painmtl/baselines.hpp"
#include "painmtl/features.hpp"
#include "painmtl/hblr.hpp"

namespace painmtl {

// Per-task class balancing by downsampling the larger class (seeded, without
// replacement). Kept rows preserve their original order. Throws DataError when
// a task lacks one of the classes.
FeatureTable balance_downsample(const FeatureTable& table, std::uint64_t seed);

// Per-task label-stratified k-fold plan over table rows. Folds partition each
// task's indices into near-equal parts; tasks with fewer than k instances
// simply contribute to fewer folds.
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> test_rows;  // per fold, ascending row indices

  std::vector<int> train_rows(int fold, int n_rows) const;
};

FoldPlan make_folds(const FeatureTable& table, int k, std::uint64_t seed);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // positive class (pain)
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Confusion-matrix metrics with positive class 1; 0/0 ratios resolve to 0.
Metrics compute_metrics(std::span<const double> predictions, std::span<const int> labels,
                        double threshold = 0.5);

enum class ModelKind { hblr, logreg_l1, logreg_l2, svm_linear, svm_rbf };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Model under evaluation. Scalar hyperparameters, when set, bypass the grid;
// otherwise the harness picks them per outer fold by inner cross-validation
// on the training split.
struct ModelSpec {
  ModelKind kind = ModelKind::hblr;
  HblrHyperParams hblr;
  std::optional<double> lambda;                       // logreg
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::optional<double> c;                            // svm
  std::vector<double> c_grid{0.1, 1.0, 10.0};
  std::optional<double> gamma;                        // rbf; resolved value
  std::vector<double> gamma_scale_grid{0.1, 1.0, 10.0};  // gamma = scale / D
  int inner_folds = 5;
};

struct ExperimentOptions {
  bool balance = true;
  int threads = 0;  // 0 = hardware concurrency
};

struct FoldResult {
  int fold = 0;
  Metrics metrics;
  std::string hyper_note;  // chosen hyperparameters, when a grid was searched
};

struct ExperimentReport {
  std::string model;
  std::uint64_t seed = 0;
  int folds = 0;
  bool balanced = false;
  std::vector<FoldResult> per_fold;
  Metrics mean;  // across folds
  Metrics stddev;
  // For hblr: memberships of a final fit on the full (balanced) table.
  std::vector<std::string> task_ids;
  Eigen::MatrixXd memberships;

  std::string to_json() const;
  std::string per_fold_csv() const;
  std::string membership_csv() const;
};

// Full harness: balance (optional), plan folds, per fold fit the normalizer
// on training rows only, train, score the held-out rows. Deterministic per
// (table, spec, folds, seed); folds may run concurrently.
ExperimentReport run_experiment(const FeatureTable& table, const ModelSpec& spec, int folds,
                                std::uint64_t seed, const ExperimentOptions& options = {});

// Chance-adjusted Rand index between two hard partitions.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Hard-assigns each task to its argmax membership column (lowest index on
// ties) and scores against the ground-truth map. Throws DataError when the
// task sets disagree.
double cluster_recovery(const Eigen::MatrixXd& memberships, const std::vector<std::string>& task_ids,
                        const std::map<std::string, int>& truth);

}  // namespace painmtl
