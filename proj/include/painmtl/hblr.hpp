#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "painmtl/features.hpp"

namespace painmtl {

// Hierarchical Bayesian logistic regression with a Dirichlet-process prior
// over task-specific weight vectors, fitted by truncated stick-breaking
// mean-field variational inference. The logistic likelihood is handled with
// the Jaakkola-Jordan quadratic bound, which gives closed-form Gaussian
// updates; one local bound parameter xi per training instance is shared
// across clusters through membership-weighted aggregation.
struct HblrHyperParams {
  int k = 4;              // truncation level
  double tau10 = 0.01;    // Gamma shape hyper-prior on the DP concentration
  double tau20 = 0.1;     // Gamma rate hyper-prior
  double sigma2 = 10.0;   // base-distribution covariance sigma2 * I
  Eigen::VectorXd prior_mean;  // empty = zero vector
  int max_sweeps = 500;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  bool cold_start = false;  // allow prediction for tasks unseen in training

  void validate() const;  // throws ConfigError
};

// Training data pooled across tasks. Rows keep task identity via task_of_row.
struct HblrDataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;  // 0/1
  std::vector<int> task_of_row;
  std::vector<std::string> task_ids;           // size M, order of first appearance
  std::vector<std::vector<int>> rows_of_task;  // size M

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(task_ids.size()); }

  static HblrDataset from_tasks(const std::vector<TaskFeatureSet>& tasks);
};

// All variational parameters of the approximate posterior.
struct VariationalState {
  Eigen::MatrixXd phi;      // M x K memberships, rows sum to 1
  Eigen::VectorXd stick_a;  // K-1 Beta first parameters (v_K = 1 has none)
  Eigen::VectorXd stick_b;  // K-1 Beta second parameters
  double tau1 = 0.0;        // Gamma shape of q(alpha)
  double tau2 = 0.0;        // Gamma rate of q(alpha)
  std::vector<Eigen::VectorXd> theta;  // K cluster means
  std::vector<Eigen::MatrixXd> gamma;  // K cluster covariances, SPD
  Eigen::VectorXd xi;                  // n local bound parameters, > 0
  double bound = 0.0;

  int k() const { return static_cast<int>(theta.size()); }
};

// Jaakkola-Jordan coefficient tanh(xi/2)/(4 xi); the xi -> 0 limit 1/8 is
// handled by a series branch.
double jj_lambda(double xi);

// E[ln v_k] and E[ln(1 - v_k)] prefix terms of the stick-breaking weights:
// column k holds E[ln v_k] + sum_{j<k} E[ln(1 - v_j)], with E[ln v_K] = 0.
Eigen::VectorXd expected_log_stick_prefix(const VariationalState& state);

VariationalState init_state(const HblrDataset& data, const HblrHyperParams& hp);

// Coordinate-ascent updates. Each one maximizes the assembled bound over its
// own block with the other blocks held fixed, so elbo() never decreases
// across a call.
void update_local_bounds(VariationalState& state, const HblrDataset& data);
void update_cluster_gaussians(VariationalState& state, const HblrDataset& data,
                              const HblrHyperParams& hp, int sweep_index = -1);
void update_memberships(VariationalState& state, const HblrDataset& data);
void update_sticks(VariationalState& state);
void update_alpha(VariationalState& state, const HblrHyperParams& hp);

double elbo(const VariationalState& state, const HblrDataset& data, const HblrHyperParams& hp);

struct TrainedHblr {
  HblrHyperParams hp;
  VariationalState state;
  std::vector<std::string> task_ids;
  std::map<std::string, int> task_index;
  NormalizationStats normalization;
  std::vector<double> bound_trace;  // bound after each sweep
};

// Runs sweeps of (local bounds, Gaussians, memberships, sticks, alpha) until
// the relative bound change drops below rel_tol or max_sweeps is reached.
// Inputs must already be normalized; stats are carried for later use.
TrainedHblr fit(const std::vector<TaskFeatureSet>& tasks, const HblrHyperParams& hp,
                NormalizationStats normalization = {});

// Expected mixture weights E[pi_k] implied by q(v) under the truncation
// v_K = 1; sums to one.
Eigen::VectorXd expected_stick_weights(const VariationalState& state);

// Predictive probability for a normalized feature vector. Known tasks use
// their learned membership row; unknown tasks use expected stick weights when
// hp.cold_start is set and throw DataError otherwise. Per-cluster predictive
// integrals use the MacKay approximation
//   sigma(theta_k' x / sqrt(1 + pi/8 * x' Gamma_k x)).
double predict_proba(const TrainedHblr& model, const std::string& task_id, const Eigen::VectorXd& x);

// Membership rows in task order (rows sum to 1); task ids via model.task_ids.
Eigen::MatrixXd membership_matrix(const TrainedHblr& model);

void write_hblr_model(const std::filesystem::path& path, const TrainedHblr& model);
TrainedHblr read_hblr_model(const std::filesystem::path& path);

}  // namespace painmtl
