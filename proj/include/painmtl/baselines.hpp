#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include "painmtl/features.hpp"

namespace painmtl {

enum class Penalty { l1, l2 };

std::string to_string(Penalty p);

// Pooled logistic regression with an unpenalized bias. The objective is the
// mean logistic loss plus lambda/2 * |w|^2 (L2) or lambda * |w|_1 (L1).
struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  Penalty penalty = Penalty::l2;
  double lambda = 0.0;
  NormalizationStats normalization;
};

struct LogregOptions {
  int max_iter = 500;        // Newton iterations (L2)
  int max_prox_iter = 50000; // proximal-gradient iterations (L1)
  double grad_tol = 1e-8;    // L2: stop when the gradient norm drops below
  double obj_tol = 1e-10;    // L1: stop when the objective change drops below
};

// Mean logistic loss plus penalty at (w, b).
double logreg_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                        double lambda, const Eigen::VectorXd& w, double bias);
// Gradient of the smooth part (mean logistic loss, plus the L2 term when
// penalty == l2) with respect to (w, b); the bias derivative lands in the
// last entry of the returned (D+1)-vector.
Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                                double lambda, const Eigen::VectorXd& w, double bias);

// L2 via damped Newton with backtracking; L1 via proximal gradient with
// backtracking. Both deterministic. Throws DataError when a class is missing.
LinearModel fit_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                       double lambda, const LogregOptions& options = {});

double predict_proba(const LinearModel& model, const Eigen::VectorXd& x);

enum class SvmKernel { linear, rbf };

std::string to_string(SvmKernel k);

struct SvmConfig {
  SvmKernel kernel = SvmKernel::linear;
  double c = 1.0;
  double gamma = 0.0;   // rbf only
  double tol = 1e-3;    // max KKT violation at termination
  long max_iter = 10000000;
};

struct SvmModel {
  SvmKernel kernel = SvmKernel::linear;
  double gamma = 0.0;
  double c = 1.0;
  Eigen::MatrixXd support_vectors;  // rows with alpha > 0
  Eigen::VectorXd dual_coef;        // alpha_i * y_i, y in {-1,+1}
  double bias = 0.0;
  NormalizationStats normalization;
};

// Soft-margin dual solved by SMO with maximal violating pair selection
// (ties break to the lowest index). Deterministic.
SvmModel fit_svm(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config);

struct SvmPrediction {
  int label = 0;      // 0/1, margin >= 0 maps to 1
  double margin = 0.0;
};

SvmPrediction predict(const SvmModel& model, const Eigen::VectorXd& x);

// Objectives for duality diagnostics on the training set.
double svm_dual_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config,
                          const Eigen::VectorXd& alpha);
double svm_primal_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config,
                            const Eigen::VectorXd& alpha, double bias);
// Full dual solution (all alphas, plus bias) for tests.
std::pair<Eigen::VectorXd, double> solve_svm_dual(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                                  const SvmConfig& config);

void write_linear_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel read_linear_model(const std::filesystem::path& path);
void write_svm_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel read_svm_model(const std::filesystem::path& path);

}  // namespace painmtl
