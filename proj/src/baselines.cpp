#include "painmtl/baselines.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "painmtl/errors.hpp"

namespace painmtl {

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(-m)), stable
double logistic_loss(double margin) {
  return margin >= 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

void check_two_classes(const Eigen::VectorXi& y) {
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0) has0 = true;
    else if (y(i) == 1) has1 = true;
    else throw DataError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw DataError("training data must contain both classes");
}

double mean_logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                          const Eigen::VectorXd& w, double bias) {
  const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(x.rows(), bias);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double s = y(i) == 1 ? 1.0 : -1.0;
    acc += logistic_loss(s * z(i));
  }
  return acc / static_cast<double>(x.rows());
}

}  // namespace

std::string to_string(Penalty p) { return p == Penalty::l1 ? "l1" : "l2"; }
std::string to_string(SvmKernel k) { return k == SvmKernel::linear ? "linear" : "rbf"; }

double logreg_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                        double lambda, const Eigen::VectorXd& w, double bias) {
  double obj = mean_logistic_loss(x, y, w, bias);
  if (penalty == Penalty::l2)
    obj += 0.5 * lambda * w.squaredNorm();
  else
    obj += lambda * w.template lpNorm<1>();
  return obj;
}

Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                                double lambda, const Eigen::VectorXd& w, double bias) {
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(n, bias);
  Eigen::VectorXd residual(n);
  for (Eigen::Index i = 0; i < n; ++i) residual(i) = sigmoid(z(i)) - y(i);
  residual /= static_cast<double>(n);

  Eigen::VectorXd grad(w.size() + 1);
  grad.head(w.size()) = x.transpose() * residual;
  if (penalty == Penalty::l2) grad.head(w.size()) += lambda * w;
  grad(w.size()) = residual.sum();
  return grad;
}

namespace {

LinearModel fit_logreg_l2(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double lambda,
                          const LogregOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double bias = 0.0;
  double obj = logreg_objective(x, y, Penalty::l2, lambda, w, bias);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Eigen::VectorXd grad = logreg_gradient(x, y, Penalty::l2, lambda, w, bias);
    if (grad.norm() < options.grad_tol) break;

    const Eigen::VectorXd z = x * w + Eigen::VectorXd::Constant(n, bias);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(z(i));
      s(i) = p * (1.0 - p);
    }
    s /= static_cast<double>(n);

    Eigen::MatrixXd hessian(d + 1, d + 1);
    hessian.topLeftCorner(d, d) = x.transpose() * s.asDiagonal() * x;
    hessian.topLeftCorner(d, d) += lambda * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd xs = x.transpose() * s;
    hessian.topRightCorner(d, 1) = xs;
    hessian.bottomLeftCorner(1, d) = xs.transpose();
    hessian(d, d) = s.sum();

    Eigen::LLT<Eigen::MatrixXd> llt(hessian);
    double damping = 1e-10;
    while (llt.info() != Eigen::Success && damping < 1e6) {
      llt.compute(hessian + damping * Eigen::MatrixXd::Identity(d + 1, d + 1));
      damping *= 10.0;
    }
    const Eigen::VectorXd step = llt.solve(-grad);

    // Armijo backtracking
    double t = 1.0;
    const double slope = grad.dot(step);
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd w_next = w + t * step.head(d);
      const double b_next = bias + t * step(d);
      const double obj_next = logreg_objective(x, y, Penalty::l2, lambda, w_next, b_next);
      if (obj_next <= obj + 1e-4 * t * slope) {
        w = w_next;
        bias = b_next;
        obj = obj_next;
        break;
      }
      t *= 0.5;
    }
  }

  LinearModel model;
  model.weights = std::move(w);
  model.bias = bias;
  model.penalty = Penalty::l2;
  model.lambda = lambda;
  return model;
}

LinearModel fit_logreg_l1(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double lambda,
                          const LogregOptions& options) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double bias = 0.0;
  double step = 1.0;
  double obj = logreg_objective(x, y, Penalty::l1, lambda, w, bias);

  auto smooth = [&](const Eigen::VectorXd& wv, double bv) {
    return mean_logistic_loss(x, y, wv, bv);
  };

  for (int iter = 0; iter < options.max_prox_iter; ++iter) {
    const Eigen::VectorXd grad = logreg_gradient(x, y, Penalty::l1, lambda, w, bias);
    const double g0 = smooth(w, bias);

    Eigen::VectorXd w_next;
    double b_next = 0.0;
    // Backtrack on the quadratic majorization of the smooth part.
    for (int bt = 0; bt < 80; ++bt) {
      Eigen::VectorXd cand = w - step * grad.head(d);
      const double thresh = step * lambda;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (cand(j) > thresh) cand(j) -= thresh;
        else if (cand(j) < -thresh) cand(j) += thresh;
        else cand(j) = 0.0;
      }
      const double b_cand = bias - step * grad(d);
      Eigen::VectorXd diff(d + 1);
      diff.head(d) = cand - w;
      diff(d) = b_cand - bias;
      const double g_cand = smooth(cand, b_cand);
      if (g_cand <= g0 + grad.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-18) {
        w_next = std::move(cand);
        b_next = b_cand;
        break;
      }
      step *= 0.5;
      if (bt == 79) {
        w_next = w;
        b_next = bias;
      }
    }

    const double obj_next = logreg_objective(x, y, Penalty::l1, lambda, w_next, b_next);
    const double change = obj - obj_next;
    w = std::move(w_next);
    bias = b_next;
    obj = obj_next;
    if (change >= 0.0 && change < options.obj_tol) break;
    step *= 1.25;  // gentle growth after accepted steps
  }

  LinearModel model;
  model.weights = std::move(w);
  model.bias = bias;
  model.penalty = Penalty::l1;
  model.lambda = lambda;
  return model;
}

}  // namespace

LinearModel fit_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, Penalty penalty,
                       double lambda, const LogregOptions& options) {
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("logreg: rows and labels disagree");
  if (!(lambda >= 0.0)) throw ConfigError("logreg: lambda must be non-negative");
  check_two_classes(y);
  return penalty == Penalty::l2 ? fit_logreg_l2(x, y, lambda, options)
                                : fit_logreg_l1(x, y, lambda, options);
}

double predict_proba(const LinearModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.weights.size()) throw DataError("logreg: feature dimension mismatch");
  return sigmoid(model.weights.dot(x) + model.bias);
}

namespace {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const SvmConfig& config) {
  if (config.kernel == SvmKernel::linear) return x * x.transpose();
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (x * x.transpose());
  k.colwise() += sq;
  k.rowwise() += sq.transpose();
  return (-config.gamma * k.array()).exp();
}

double kernel_eval(const SvmConfig& config, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (config.kernel == SvmKernel::linear) return a.dot(b);
  return std::exp(-config.gamma * (a - b).squaredNorm());
}

}  // namespace

std::pair<Eigen::VectorXd, double> solve_svm_dual(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                                  const SvmConfig& config) {
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("svm: rows and labels disagree");
  if (!(config.c > 0.0)) throw ConfigError("svm: C must be positive");
  if (config.kernel == SvmKernel::rbf && !(config.gamma > 0.0))
    throw ConfigError("svm: rbf gamma must be positive");
  check_two_classes(y);

  const Eigen::Index n = x.rows();
  Eigen::VectorXd sy(n);
  for (Eigen::Index i = 0; i < n; ++i) sy(i) = y(i) == 1 ? 1.0 : -1.0;

  const Eigen::MatrixXd kmat = kernel_matrix(x, config);
  const Eigen::MatrixXd q = sy * sy.transpose();  // sign matrix
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // d/d alpha of 1/2 a'Qa - e'a
  const double c = config.c;

  double m_up = 0.0, m_low = 0.0;
  for (long iter = 0; iter < config.max_iter; ++iter) {
    // maximal violating pair over I_up / I_low
    int i_up = -1, i_low = -1;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -sy(t) * grad(t);
      const bool in_up = (sy(t) > 0.0 && alpha(t) < c) || (sy(t) < 0.0 && alpha(t) > 0.0);
      const bool in_low = (sy(t) > 0.0 && alpha(t) > 0.0) || (sy(t) < 0.0 && alpha(t) < c);
      if (in_up && v > m_up) {
        m_up = v;
        i_up = static_cast<int>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        i_low = static_cast<int>(t);
      }
    }
    if (i_up < 0 || i_low < 0 || m_up - m_low < config.tol) break;

    const int i = i_up, j = i_low;
    const double yi = sy(i), yj = sy(j);
    double eta = kmat(i, i) + kmat(j, j) - 2.0 * kmat(i, j);
    if (eta < 1e-12) eta = 1e-12;

    // two-variable subproblem keeping sum alpha_t y_t fixed
    const double delta = (m_up - m_low) / eta;
    double ai = alpha(i), aj = alpha(j);
    double di = yi * delta;
    // clip to the box for both coordinates
    double lo, hi;
    if (yi * yj > 0.0) {  // alpha_i + alpha_j constant
      const double sum = ai + aj;
      lo = std::max(0.0, sum - c);
      hi = std::min(c, sum);
      double ai_new = std::min(hi, std::max(lo, ai + di));
      aj = sum - ai_new;
      ai = ai_new;
    } else {  // alpha_i - alpha_j constant
      const double diff = ai - aj;
      lo = std::max(0.0, diff);
      hi = std::min(c, c + diff);
      double ai_new = std::min(hi, std::max(lo, ai + di));
      aj = ai_new - diff;
      ai = ai_new;
    }
    const double d_ai = ai - alpha(i);
    const double d_aj = aj - alpha(j);
    alpha(i) = ai;
    alpha(j) = aj;
    grad += (q.col(i).cwiseProduct(kmat.col(i))) * d_ai + (q.col(j).cwiseProduct(kmat.col(j))) * d_aj;
  }

  const double bias = (m_up + m_low) / 2.0;
  return {alpha, bias};
}

SvmModel fit_svm(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config) {
  auto [alpha, bias] = solve_svm_dual(x, y, config);
  const Eigen::Index n = x.rows();

  SvmModel model;
  model.kernel = config.kernel;
  model.gamma = config.gamma;
  model.c = config.c;
  model.bias = bias;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i)
    if (alpha(i) > 0.0) sv.push_back(i);
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = x.row(sv[r]);
    model.dual_coef(static_cast<Eigen::Index>(r)) = alpha(sv[r]) * (y(sv[r]) == 1 ? 1.0 : -1.0);
  }
  return model;
}

SvmPrediction predict(const SvmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.support_vectors.cols() && model.support_vectors.rows() > 0)
    throw DataError("svm: feature dimension mismatch");
  SvmConfig cfg;
  cfg.kernel = model.kernel;
  cfg.gamma = model.gamma;
  double margin = model.bias;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
    margin += model.dual_coef(i) * kernel_eval(cfg, model.support_vectors.row(i).transpose(), x);
  return {margin >= 0.0 ? 1 : 0, margin};
}

double svm_dual_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config,
                          const Eigen::VectorXd& alpha) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd sy(n);
  for (Eigen::Index i = 0; i < n; ++i) sy(i) = y(i) == 1 ? 1.0 : -1.0;
  const Eigen::MatrixXd kmat = kernel_matrix(x, config);
  const Eigen::VectorXd ay = alpha.cwiseProduct(sy);
  return alpha.sum() - 0.5 * ay.dot(kmat * ay);
}

double svm_primal_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const SvmConfig& config,
                            const Eigen::VectorXd& alpha, double bias) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd sy(n);
  for (Eigen::Index i = 0; i < n; ++i) sy(i) = y(i) == 1 ? 1.0 : -1.0;
  const Eigen::MatrixXd kmat = kernel_matrix(x, config);
  const Eigen::VectorXd ay = alpha.cwiseProduct(sy);
  const Eigen::VectorXd f = kmat * ay + Eigen::VectorXd::Constant(n, bias);
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - sy(i) * f(i));
  return 0.5 * ay.dot(kmat * ay) + config.c * hinge;
}

namespace {

nlohmann::json norm_to_json(const NormalizationStats& stats) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size());
  j["stddev"] = std::vector<double>(stats.stddev.data(), stats.stddev.data() + stats.stddev.size());
  return j;
}

NormalizationStats norm_from_json(const nlohmann::json& j) {
  NormalizationStats stats;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("stddev").get<std::vector<double>>();
  stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  stats.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return stats;
}

}  // namespace

void write_linear_model(const std::filesystem::path& path, const LinearModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["model_type"] = "logreg";
  j["penalty"] = to_string(model.penalty);
  j["lambda"] = model.lambda;
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["bias"] = model.bias;
  j["normalization"] = norm_to_json(model.normalization);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

LinearModel read_linear_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("model file '" + path.string() + "': invalid JSON");
  if (j.value("model_type", "") != "logreg")
    throw ParseError("model file '" + path.string() + "': not a logreg model");
  LinearModel model;
  try {
    model.penalty = j.at("penalty").get<std::string>() == "l1" ? Penalty::l1 : Penalty::l2;
    model.lambda = j.at("lambda").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    model.bias = j.at("bias").get<double>();
    model.normalization = norm_from_json(j.at("normalization"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path.string() + "': " + e.what());
  }
  return model;
}

void write_svm_model(const std::filesystem::path& path, const SvmModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["model_type"] = "svm";
  j["kernel"] = to_string(model.kernel);
  j["gamma"] = model.gamma;
  j["c"] = model.c;
  nlohmann::json svs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index d = 0; d < model.support_vectors.cols(); ++d) row.push_back(model.support_vectors(i, d));
    svs.push_back(std::move(row));
  }
  j["support_vectors"] = std::move(svs);
  j["dual_coef"] =
      std::vector<double>(model.dual_coef.data(), model.dual_coef.data() + model.dual_coef.size());
  j["bias"] = model.bias;
  j["normalization"] = norm_to_json(model.normalization);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

SvmModel read_svm_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("model file '" + path.string() + "': invalid JSON");
  if (j.value("model_type", "") != "svm")
    throw ParseError("model file '" + path.string() + "': not an svm model");
  SvmModel model;
  try {
    model.kernel = j.at("kernel").get<std::string>() == "rbf" ? SvmKernel::rbf : SvmKernel::linear;
    model.gamma = j.at("gamma").get<double>();
    model.c = j.at("c").get<double>();
    const auto& svs = j.at("support_vectors");
    const Eigen::Index rows = static_cast<Eigen::Index>(svs.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(svs.front().size()) : 0;
    model.support_vectors.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index d = 0; d < cols; ++d)
        model.support_vectors(i, d) = svs[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)].get<double>();
    const auto coef = j.at("dual_coef").get<std::vector<double>>();
    model.dual_coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    model.bias = j.at("bias").get<double>();
    model.normalization = norm_from_json(j.at("normalization"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path.string() + "': " + e.what());
  }
  return model;
}

}  // namespace painmtl
