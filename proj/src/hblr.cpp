#include "painmtl/hblr.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/rng.hpp"

namespace painmtl {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kXiFloor = 1e-8;

using boost::math::digamma;
using boost::math::lgamma;

double log_sigmoid(double z) {
  // log sigma(z), stable for both signs
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double log_beta(double a, double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

// Per-cluster linear responses u = X theta_k and quadratic forms
// q_i = x_i' Gamma_k x_i, both n x K.
struct ClusterForms {
  Eigen::MatrixXd u;
  Eigen::MatrixXd q;
};

ClusterForms cluster_forms(const VariationalState& state, const HblrDataset& data) {
  const int k = state.k();
  ClusterForms forms;
  forms.u.resize(data.n(), k);
  forms.q.resize(data.n(), k);
  for (int c = 0; c < k; ++c) {
    forms.u.col(c) = data.x * state.theta[static_cast<std::size_t>(c)];
    forms.q.col(c) =
        (data.x * state.gamma[static_cast<std::size_t>(c)]).cwiseProduct(data.x).rowwise().sum();
  }
  return forms;
}

// Membership weight of row i for cluster k: phi[task_of_row[i], k].
Eigen::VectorXd row_weights(const VariationalState& state, const HblrDataset& data, int cluster) {
  Eigen::VectorXd w(data.n());
  for (int i = 0; i < data.n(); ++i) w(i) = state.phi(data.task_of_row[static_cast<std::size_t>(i)], cluster);
  return w;
}

}  // namespace

void HblrHyperParams::validate() const {
  if (k < 1) throw ConfigError("hblr truncation level k must be at least 1");
  if (!(tau10 > 0.0) || !(tau20 > 0.0)) throw ConfigError("hblr tau10 and tau20 must be positive");
  if (!(sigma2 > 0.0)) throw ConfigError("hblr sigma2 must be positive");
  if (max_sweeps < 1) throw ConfigError("hblr max_sweeps must be at least 1");
  if (!(rel_tol > 0.0)) throw ConfigError("hblr rel_tol must be positive");
}

HblrDataset HblrDataset::from_tasks(const std::vector<TaskFeatureSet>& tasks) {
  HblrDataset data;
  if (tasks.empty()) throw DataError("hblr requires at least one task");
  const Eigen::Index d = tasks.front().x.cols();
  Eigen::Index n = 0;
  for (const auto& t : tasks) {
    if (t.x.cols() != d)
      throw DataError("task '" + t.task_id + "' has dimension " + std::to_string(t.x.cols()) +
                      ", expected " + std::to_string(d));
    if (t.x.rows() == 0) throw DataError("task '" + t.task_id + "' has no instances");
    if (t.x.rows() != t.y.size()) throw DataError("task '" + t.task_id + "': rows and labels disagree");
    n += t.x.rows();
  }
  data.x.resize(n, d);
  data.y.resize(n);
  data.task_of_row.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (const auto& t : tasks) {
    if (std::find(data.task_ids.begin(), data.task_ids.end(), t.task_id) != data.task_ids.end())
      throw DataError("duplicate task id '" + t.task_id + "'");
    const int m = static_cast<int>(data.task_ids.size());
    data.task_ids.push_back(t.task_id);
    data.rows_of_task.emplace_back();
    for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
      data.x.row(row) = t.x.row(i);
      const int label = t.y(i);
      if (label != 0 && label != 1) throw DataError("task '" + t.task_id + "': labels must be 0 or 1");
      data.y(row) = label;
      data.task_of_row.push_back(m);
      data.rows_of_task.back().push_back(static_cast<int>(row));
      ++row;
    }
  }
  return data;
}

double jj_lambda(double xi) {
  const double axi = std::abs(xi);
  if (axi < 1e-4) return 0.125 - axi * axi / 96.0;
  return std::tanh(axi / 2.0) / (4.0 * axi);
}

Eigen::VectorXd expected_log_stick_prefix(const VariationalState& state) {
  const int k = state.k();
  Eigen::VectorXd prefix(k);
  double acc = 0.0;  // sum of E[ln(1 - v_j)] for j < current
  for (int c = 0; c < k; ++c) {
    if (c < k - 1) {
      const double a = state.stick_a(c);
      const double b = state.stick_b(c);
      const double psi_ab = digamma(a + b);
      prefix(c) = acc + digamma(a) - psi_ab;
      acc += digamma(b) - psi_ab;
    } else {
      prefix(c) = acc;  // E[ln v_K] = 0 under the truncation
    }
  }
  return prefix;
}

VariationalState init_state(const HblrDataset& data, const HblrHyperParams& hp) {
  hp.validate();
  const int k = hp.k;
  const int d = data.d();
  const int m = data.m();

  VariationalState state;
  state.phi.resize(m, k);
  // Uniform rows plus a seeded categorical perturbation: each task leans
  // toward one random cluster. Weak perturbations collapse under the
  // stick-breaking prior before the cluster atoms can differentiate.
  constexpr double kInitLean = 0.75;
  for (int t = 0; t < m; ++t) {
    Rng rng(derive_seed(hp.seed, "hblr/init/phi/" + data.task_ids[static_cast<std::size_t>(t)]));
    const int lean = static_cast<int>(rng.integer(static_cast<std::uint64_t>(k)));
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      state.phi(t, c) = (1.0 - kInitLean) / k + (c == lean ? kInitLean : 0.0);
      sum += state.phi(t, c);
    }
    state.phi.row(t) /= sum;
  }

  state.theta.resize(static_cast<std::size_t>(k));
  state.gamma.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    Rng rng(derive_seed(hp.seed, "hblr/init/theta/" + std::to_string(c)));
    auto& theta = state.theta[static_cast<std::size_t>(c)];
    theta.resize(d);
    for (int j = 0; j < d; ++j) theta(j) = rng.normal(0.0, 0.1);
    state.gamma[static_cast<std::size_t>(c)] = hp.sigma2 * Eigen::MatrixXd::Identity(d, d);
  }

  state.xi = Eigen::VectorXd::Ones(data.n());
  state.stick_a = Eigen::VectorXd::Ones(std::max(0, k - 1));
  state.stick_b = Eigen::VectorXd::Ones(std::max(0, k - 1));
  state.tau1 = hp.tau10;
  state.tau2 = hp.tau20;
  update_sticks(state);
  update_alpha(state, hp);
  state.bound = std::numeric_limits<double>::quiet_NaN();
  return state;
}

void update_local_bounds(VariationalState& state, const HblrDataset& data) {
  const ClusterForms forms = cluster_forms(state, data);
  for (int i = 0; i < data.n(); ++i) {
    const int task = data.task_of_row[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (int c = 0; c < state.k(); ++c)
      acc += state.phi(task, c) * (forms.q(i, c) + forms.u(i, c) * forms.u(i, c));
    state.xi(i) = std::max(kXiFloor, std::sqrt(std::max(0.0, acc)));
  }
}

void update_cluster_gaussians(VariationalState& state, const HblrDataset& data,
                              const HblrHyperParams& hp, int sweep_index) {
  const int d = data.d();
  const Eigen::VectorXd prior_mean =
      hp.prior_mean.size() == 0 ? Eigen::VectorXd::Zero(d).eval() : hp.prior_mean;
  if (prior_mean.size() != d) throw ConfigError("hblr prior_mean dimension mismatch");
  const double sigma2_inv = 1.0 / hp.sigma2;

  Eigen::VectorXd lam(data.n());
  for (int i = 0; i < data.n(); ++i) lam(i) = jj_lambda(state.xi(i));
  const Eigen::VectorXd y_centered = data.y.array() - 0.5;

  for (int c = 0; c < state.k(); ++c) {
    const Eigen::VectorXd w = row_weights(state, data, c);
    const Eigen::VectorXd coef = 2.0 * w.cwiseProduct(lam);
    Eigen::MatrixXd precision = sigma2_inv * Eigen::MatrixXd::Identity(d, d);
    precision.noalias() += data.x.transpose() * coef.asDiagonal() * data.x;
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw InferenceError("cluster covariance update lost positive definiteness", sweep_index);
    const Eigen::VectorXd rhs =
        sigma2_inv * prior_mean + data.x.transpose() * w.cwiseProduct(y_centered);
    state.theta[static_cast<std::size_t>(c)] = llt.solve(rhs);
    state.gamma[static_cast<std::size_t>(c)] = llt.solve(Eigen::MatrixXd::Identity(d, d));
  }
}

namespace {

// JJ-bounded expected log-likelihood of row i under cluster c, given u, q and
// xi: log sig(xi) - xi/2 + lambda*xi^2 + (y - 1/2) u - lambda (q + u^2).
Eigen::MatrixXd jj_loglik_matrix(const VariationalState& state, const HblrDataset& data,
                                 const ClusterForms& forms) {
  Eigen::MatrixXd ll(data.n(), state.k());
  for (int i = 0; i < data.n(); ++i) {
    const double xi = state.xi(i);
    const double lam = jj_lambda(xi);
    const double base = log_sigmoid(xi) - 0.5 * xi + lam * xi * xi;
    const double yc = data.y(i) - 0.5;
    for (int c = 0; c < state.k(); ++c) {
      const double u = forms.u(i, c);
      ll(i, c) = base + yc * u - lam * (forms.q(i, c) + u * u);
    }
  }
  return ll;
}

}  // namespace

void update_memberships(VariationalState& state, const HblrDataset& data) {
  const ClusterForms forms = cluster_forms(state, data);
  const Eigen::MatrixXd loglik = jj_loglik_matrix(state, data, forms);
  const Eigen::VectorXd prefix = expected_log_stick_prefix(state);

  for (int t = 0; t < data.m(); ++t) {
    Eigen::VectorXd logits = prefix;
    for (int row : data.rows_of_task[static_cast<std::size_t>(t)])
      logits += loglik.row(row).transpose();
    const double max_logit = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - max_logit).exp();
    state.phi.row(t) = p.transpose() / p.sum();
  }
}

void update_sticks(VariationalState& state) {
  const int k = state.k();
  if (k < 2) return;
  const double e_alpha = state.tau1 / state.tau2;
  const Eigen::VectorXd cluster_mass = state.phi.colwise().sum().transpose();
  double tail = 0.0;  // sum of cluster_mass for j > current, accumulated backwards
  for (int c = k - 2; c >= 0; --c) {
    tail += cluster_mass(c + 1);
    state.stick_a(c) = 1.0 + cluster_mass(c);
    state.stick_b(c) = e_alpha + tail;
  }
}

void update_alpha(VariationalState& state, const HblrHyperParams& hp) {
  const int k = state.k();
  state.tau1 = hp.tau10 + k - 1;
  double acc = 0.0;
  for (int c = 0; c < k - 1; ++c)
    acc += digamma(state.stick_b(c)) - digamma(state.stick_a(c) + state.stick_b(c));
  state.tau2 = hp.tau20 - acc;  // each summand is <= 0
}

double elbo(const VariationalState& state, const HblrDataset& data, const HblrHyperParams& hp) {
  const int k = state.k();
  const int d = data.d();
  const Eigen::VectorXd prior_mean =
      hp.prior_mean.size() == 0 ? Eigen::VectorXd::Zero(d).eval() : hp.prior_mean;
  const double sigma2_inv = 1.0 / hp.sigma2;

  const ClusterForms forms = cluster_forms(state, data);
  const Eigen::MatrixXd loglik = jj_loglik_matrix(state, data, forms);

  double bound = 0.0;
  // Likelihood under the JJ bound, weighted by memberships.
  for (int i = 0; i < data.n(); ++i) {
    const int task = data.task_of_row[static_cast<std::size_t>(i)];
    for (int c = 0; c < k; ++c) bound += state.phi(task, c) * loglik(i, c);
  }

  // Memberships: prior against stick weights plus entropy.
  const Eigen::VectorXd prefix = expected_log_stick_prefix(state);
  for (int t = 0; t < data.m(); ++t) {
    for (int c = 0; c < k; ++c) {
      const double p = state.phi(t, c);
      bound += p * prefix(c);
      if (p > 0.0) bound -= p * std::log(p);
    }
  }

  // Sticks: E[log Beta(v_k; 1, alpha)] plus Beta entropies.
  const double e_alpha = state.tau1 / state.tau2;
  const double e_log_alpha = digamma(state.tau1) - std::log(state.tau2);
  for (int c = 0; c < k - 1; ++c) {
    const double a = state.stick_a(c);
    const double b = state.stick_b(c);
    const double psi_ab = digamma(a + b);
    const double e_log_1mv = digamma(b) - psi_ab;
    bound += e_log_alpha + (e_alpha - 1.0) * e_log_1mv;
    bound += log_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * psi_ab;
  }

  // Concentration: Gamma prior cross-entropy plus Gamma entropy.
  bound += hp.tau10 * std::log(hp.tau20) - lgamma(hp.tau10) + (hp.tau10 - 1.0) * e_log_alpha -
           hp.tau20 * e_alpha;
  bound += state.tau1 - std::log(state.tau2) + lgamma(state.tau1) +
           (1.0 - state.tau1) * digamma(state.tau1);

  // Cluster atoms: Gaussian prior cross-entropy plus Gaussian entropies.
  for (int c = 0; c < k; ++c) {
    const auto& gamma = state.gamma[static_cast<std::size_t>(c)];
    const auto& theta = state.theta[static_cast<std::size_t>(c)];
    Eigen::LLT<Eigen::MatrixXd> llt(gamma);
    if (llt.info() != Eigen::Success)
      throw InferenceError("cluster covariance is not positive definite in elbo", -1);
    double log_det = 0.0;
    for (int j = 0; j < d; ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
    bound += -0.5 * d * std::log(2.0 * kPi) - 0.5 * d * std::log(hp.sigma2) -
             0.5 * sigma2_inv * (gamma.trace() + (theta - prior_mean).squaredNorm());
    bound += 0.5 * d * (1.0 + std::log(2.0 * kPi)) + 0.5 * log_det;
  }
  return bound;
}

TrainedHblr fit(const std::vector<TaskFeatureSet>& tasks, const HblrHyperParams& hp,
                NormalizationStats normalization) {
  hp.validate();
  const HblrDataset data = HblrDataset::from_tasks(tasks);

  TrainedHblr model;
  model.hp = hp;
  model.task_ids = data.task_ids;
  for (std::size_t t = 0; t < data.task_ids.size(); ++t)
    model.task_index[data.task_ids[t]] = static_cast<int>(t);
  model.normalization = std::move(normalization);

  VariationalState state = init_state(data, hp);
  double previous = -std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < hp.max_sweeps; ++sweep) {
    update_local_bounds(state, data);
    update_cluster_gaussians(state, data, hp, sweep);
    update_memberships(state, data);
    update_sticks(state);
    update_alpha(state, hp);
    state.bound = elbo(state, data, hp);
    model.bound_trace.push_back(state.bound);
    if (sweep > 0 && std::abs(state.bound - previous) < hp.rel_tol * std::max(1.0, std::abs(previous)))
      break;
    previous = state.bound;
  }
  model.state = std::move(state);
  return model;
}

Eigen::VectorXd expected_stick_weights(const VariationalState& state) {
  const int k = state.k();
  Eigen::VectorXd weights(k);
  double remaining = 1.0;
  for (int c = 0; c < k - 1; ++c) {
    const double e_v = state.stick_a(c) / (state.stick_a(c) + state.stick_b(c));
    weights(c) = remaining * e_v;
    remaining *= 1.0 - e_v;
  }
  weights(k - 1) = remaining;
  return weights;
}

double predict_proba(const TrainedHblr& model, const std::string& task_id, const Eigen::VectorXd& x) {
  const auto& state = model.state;
  if (x.size() != state.theta.front().size())
    throw DataError("feature dimension does not match the trained model");

  Eigen::VectorXd weights;
  auto it = model.task_index.find(task_id);
  if (it != model.task_index.end()) {
    weights = state.phi.row(it->second).transpose();
  } else if (model.hp.cold_start) {
    weights = expected_stick_weights(state);
  } else {
    throw DataError("unknown task '" + task_id + "' (cold-start prediction is disabled)");
  }

  double p = 0.0;
  for (int c = 0; c < state.k(); ++c) {
    const auto& gamma = state.gamma[static_cast<std::size_t>(c)];
    const double mean = state.theta[static_cast<std::size_t>(c)].dot(x);
    const double var = x.dot(gamma * x);
    p += weights(c) * sigmoid(mean / std::sqrt(1.0 + kPi / 8.0 * var));
  }
  return p;
}

Eigen::MatrixXd membership_matrix(const TrainedHblr& model) { return model.state.phi; }

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

void write_hblr_model(const std::filesystem::path& path, const TrainedHblr& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["model_type"] = "hblr";
  j["hyperparams"] = {{"k", model.hp.k},           {"tau10", model.hp.tau10},
                      {"tau20", model.hp.tau20},   {"sigma2", model.hp.sigma2},
                      {"max_sweeps", model.hp.max_sweeps}, {"rel_tol", model.hp.rel_tol},
                      {"seed", model.hp.seed},     {"cold_start", model.hp.cold_start}};
  if (model.hp.prior_mean.size() > 0) j["hyperparams"]["prior_mean"] = vector_to_json(model.hp.prior_mean);
  j["task_ids"] = model.task_ids;
  j["phi"] = matrix_to_json(model.state.phi);
  j["stick_a"] = vector_to_json(model.state.stick_a);
  j["stick_b"] = vector_to_json(model.state.stick_b);
  j["tau1"] = model.state.tau1;
  j["tau2"] = model.state.tau2;
  nlohmann::json thetas = nlohmann::json::array();
  nlohmann::json gammas = nlohmann::json::array();
  for (int c = 0; c < model.state.k(); ++c) {
    thetas.push_back(vector_to_json(model.state.theta[static_cast<std::size_t>(c)]));
    gammas.push_back(matrix_to_json(model.state.gamma[static_cast<std::size_t>(c)]));
  }
  j["theta"] = std::move(thetas);
  j["gamma"] = std::move(gammas);
  j["normalization"] = {{"mean", vector_to_json(model.normalization.mean)},
                        {"stddev", vector_to_json(model.normalization.stddev)}};
  j["bound_trace"] = model.bound_trace;

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

TrainedHblr read_hblr_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("model file '" + path.string() + "': invalid JSON");
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw ParseError("model file '" + path.string() + "': unsupported format_version");
  if (j.value("model_type", "") != "hblr")
    throw ParseError("model file '" + path.string() + "': not an hblr model");

  TrainedHblr model;
  try {
    const auto& hp = j.at("hyperparams");
    model.hp.k = hp.at("k").get<int>();
    model.hp.tau10 = hp.at("tau10").get<double>();
    model.hp.tau20 = hp.at("tau20").get<double>();
    model.hp.sigma2 = hp.at("sigma2").get<double>();
    model.hp.max_sweeps = hp.at("max_sweeps").get<int>();
    model.hp.rel_tol = hp.at("rel_tol").get<double>();
    model.hp.seed = hp.at("seed").get<std::uint64_t>();
    model.hp.cold_start = hp.at("cold_start").get<bool>();
    if (hp.contains("prior_mean")) model.hp.prior_mean = vector_from_json(hp.at("prior_mean"));
    model.task_ids = j.at("task_ids").get<std::vector<std::string>>();
    for (std::size_t t = 0; t < model.task_ids.size(); ++t)
      model.task_index[model.task_ids[t]] = static_cast<int>(t);
    model.state.phi = matrix_from_json(j.at("phi"), "phi");
    model.state.stick_a = vector_from_json(j.at("stick_a"));
    model.state.stick_b = vector_from_json(j.at("stick_b"));
    model.state.tau1 = j.at("tau1").get<double>();
    model.state.tau2 = j.at("tau2").get<double>();
    for (const auto& t : j.at("theta")) model.state.theta.push_back(vector_from_json(t));
    for (const auto& g : j.at("gamma")) model.state.gamma.push_back(matrix_from_json(g, "gamma"));
    model.normalization.mean = vector_from_json(j.at("normalization").at("mean"));
    model.normalization.stddev = vector_from_json(j.at("normalization").at("stddev"));
    model.bound_trace = j.value("bound_trace", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path.string() + "': " + e.what());
  }
  if (model.state.phi.rows() != static_cast<Eigen::Index>(model.task_ids.size()))
    throw ParseError("model file '" + path.string() + "': phi row count does not match task_ids");
  return model;
}

}  // namespace painmtl
