#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/hblr.hpp"
#include "painmtl/rng.hpp"

using namespace painmtl;

namespace {

// Random small instance: m tasks, up to max_rows rows each, dimension d.
std::vector<TaskFeatureSet> random_tasks(int m, int max_rows, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TaskFeatureSet> tasks;
  for (int t = 0; t < m; ++t) {
    TaskFeatureSet set;
    set.task_id = "t" + std::to_string(t);
    const int rows = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(max_rows)));
    set.x.resize(rows, d);
    set.y.resize(rows);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < d; ++j) set.x(i, j) = rng.normal();
      set.y(i) = static_cast<int>(rng.integer(2));
    }
    // every task carries both classes when it has at least two rows
    if (rows >= 2) {
      set.y(0) = 0;
      set.y(1) = 1;
    }
    tasks.push_back(std::move(set));
  }
  return tasks;
}

HblrHyperParams small_hp(int k, std::uint64_t seed) {
  HblrHyperParams hp;
  hp.k = k;
  hp.seed = seed;
  return hp;
}

}  // namespace

TEST_CASE("jj lambda hits the analytic limit 1/8 at zero") {
  CHECK(jj_lambda(0.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(jj_lambda(1e-12) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(jj_lambda(1.0) == doctest::Approx(0.11552928931500244).epsilon(1e-14));
  // series branch agrees with the direct formula near the switch point
  CHECK(jj_lambda(1e-4) == doctest::Approx(std::tanh(0.5e-4) / (4e-4)).epsilon(1e-12));
}

TEST_CASE("init produces row-stochastic memberships, is seed-deterministic") {
  const auto tasks = random_tasks(5, 6, 3, 10);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  const auto a = init_state(data, small_hp(4, 1));
  const auto b = init_state(data, small_hp(4, 1));
  const auto c = init_state(data, small_hp(4, 2));
  CHECK(a.phi == b.phi);
  CHECK(a.phi != c.phi);
  for (int t = 0; t < data.m(); ++t) CHECK(a.phi.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a.phi.array() >= 0.0).all());
  CHECK(a.xi.size() == data.n());
  CHECK((a.xi.array() == 1.0).all());
}

TEST_CASE("K=1 init gives the all-ones membership column") {
  const auto tasks = random_tasks(4, 5, 2, 11);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  const auto state = init_state(data, small_hp(1, 3));
  CHECK(state.phi.cols() == 1);
  for (int t = 0; t < data.m(); ++t) CHECK(state.phi(t, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("dimension mismatch across tasks is a data error") {
  auto tasks = random_tasks(2, 4, 3, 12);
  tasks[1].x.resize(2, 4);
  tasks[1].y.resize(2);
  tasks[1].y << 0, 1;
  CHECK_THROWS_AS(HblrDataset::from_tasks(tasks), DataError);
}

TEST_CASE("local bounds: theta = 0 and Gamma = I give xi = |x|") {
  const auto tasks = random_tasks(3, 4, 3, 13);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  auto state = init_state(data, small_hp(3, 5));
  for (auto& th : state.theta) th.setZero();
  for (auto& ga : state.gamma) ga.setIdentity();
  update_local_bounds(state, data);
  for (int i = 0; i < data.n(); ++i)
    CHECK(state.xi(i) == doctest::Approx(data.x.row(i).norm()).epsilon(1e-12));
}

TEST_CASE("local bounds floor xi at 1e-8 for zero inputs") {
  TaskFeatureSet set;
  set.task_id = "z";
  set.x = Eigen::MatrixXd::Zero(2, 2);
  set.y.resize(2);
  set.y << 0, 1;
  const HblrDataset data = HblrDataset::from_tasks({set});
  auto state = init_state(data, small_hp(2, 5));
  update_local_bounds(state, data);
  CHECK((state.xi.array() == 1e-8).all());
}

TEST_CASE("local bounds match the stated formula on a random instance") {
  const auto tasks = random_tasks(4, 6, 3, 14);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  auto state = init_state(data, small_hp(3, 6));
  update_cluster_gaussians(state, data, small_hp(3, 6));
  update_local_bounds(state, data);
  for (int i = 0; i < data.n(); ++i) {
    double acc = 0.0;
    const int t = data.task_of_row[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) {
      const double u = state.theta[static_cast<std::size_t>(c)].dot(data.x.row(i));
      const double q = data.x.row(i) * state.gamma[static_cast<std::size_t>(c)] * data.x.row(i).transpose();
      acc += state.phi(t, c) * (q + u * u);
    }
    CHECK(state.xi(i) == doctest::Approx(std::sqrt(acc)).epsilon(1e-10));
  }
}

TEST_CASE("clusters with no assigned mass revert to the prior") {
  const auto tasks = random_tasks(3, 4, 2, 15);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  HblrHyperParams hp = small_hp(2, 7);
  auto state = init_state(data, hp);
  state.phi.col(0).setOnes();
  state.phi.col(1).setZero();
  update_cluster_gaussians(state, data, hp);
  CHECK((state.gamma[1] - hp.sigma2 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(state.theta[1].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scalar gaussian update matches the hand computation") {
  // one datum: x = 2, y = 1, xi = 1, sigma2 = 10, phi = 1
  TaskFeatureSet set;
  set.task_id = "s";
  set.x.resize(1, 1);
  set.x << 2.0;
  set.y.resize(1);
  set.y << 1;
  const HblrDataset data = HblrDataset::from_tasks({set});
  HblrHyperParams hp = small_hp(1, 8);
  auto state = init_state(data, hp);
  state.xi(0) = 1.0;
  update_cluster_gaussians(state, data, hp);
  const double lambda1 = std::tanh(0.5) / 4.0;
  const double precision = 0.1 + 2.0 * lambda1 * 4.0;
  CHECK(state.gamma[0](0, 0) == doctest::Approx(1.0 / precision).epsilon(1e-14));
  CHECK(state.theta[0](0) == doctest::Approx((0.5 * 2.0) / precision).epsilon(1e-14));
}

TEST_CASE("memberships: K=1 stays at one; identical clusters split evenly") {
  const auto tasks = random_tasks(3, 5, 2, 16);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  auto one = init_state(data, small_hp(1, 9));
  update_memberships(one, data);
  CHECK((one.phi.array() == 1.0).all());

  auto two = init_state(data, small_hp(2, 9));
  two.theta[1] = two.theta[0];
  two.gamma[1] = two.gamma[0];
  two.stick_a(0) = 3.0;
  two.stick_b(0) = 3.0;
  // equal sticks require E[ln v_1] = E[ln(1 - v_1)] and no tail term; with
  // K = 2 the prefix of cluster 2 is E[ln(1 - v_1)], of cluster 1 E[ln v_1]
  update_memberships(two, data);
  for (int t = 0; t < data.m(); ++t) {
    CHECK(two.phi(t, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two.phi(t, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("membership rows match the stated formula on a random instance") {
  const auto tasks = random_tasks(4, 5, 3, 17);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  HblrHyperParams hp = small_hp(3, 10);
  auto state = init_state(data, hp);
  update_local_bounds(state, data);
  update_cluster_gaussians(state, data, hp);
  const VariationalState before = state;
  update_memberships(state, data);

  const Eigen::VectorXd prefix = expected_log_stick_prefix(before);
  for (int t = 0; t < data.m(); ++t) {
    Eigen::VectorXd logits = prefix;
    for (int c = 0; c < 3; ++c) {
      for (int i : data.rows_of_task[static_cast<std::size_t>(t)]) {
        const double xi = before.xi(i);
        const double lam = oracles::naive_jj_lambda(xi);
        const double u = before.theta[static_cast<std::size_t>(c)].dot(data.x.row(i));
        const double q =
            data.x.row(i) * before.gamma[static_cast<std::size_t>(c)] * data.x.row(i).transpose();
        logits(c) += std::log(oracles::sigmoid(xi)) - xi / 2.0 + lam * xi * xi +
                     (data.y(i) - 0.5) * u - lam * (q + u * u);
      }
    }
    const Eigen::VectorXd expect = (logits.array() - logits.maxCoeff()).exp();
    for (int c = 0; c < 3; ++c)
      CHECK(state.phi(t, c) == doctest::Approx(expect(c) / expect.sum()).epsilon(1e-10));
    CHECK(state.phi.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stick updates reproduce the closed forms") {
  const auto tasks = random_tasks(6, 4, 2, 18);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  HblrHyperParams hp = small_hp(3, 11);
  auto state = init_state(data, hp);

  SUBCASE("all mass in cluster 1") {
    state.phi.setZero();
    state.phi.col(0).setOnes();
    update_sticks(state);
    CHECK(state.stick_a(0) == doctest::Approx(1.0 + data.m()).epsilon(1e-14));
    CHECK(state.stick_b(0) == doctest::Approx(state.tau1 / state.tau2).epsilon(1e-14));
  }
  SUBCASE("uniform memberships") {
    state.phi.setConstant(1.0 / 3.0);
    update_sticks(state);
    CHECK(state.stick_a(0) == doctest::Approx(1.0 + data.m() / 3.0).epsilon(1e-12));
    CHECK(state.stick_a(1) == doctest::Approx(1.0 + data.m() / 3.0).epsilon(1e-12));
    CHECK(state.stick_b(1) == doctest::Approx(state.tau1 / state.tau2 + data.m() / 3.0).epsilon(1e-12));
  }
  SUBCASE("random memberships match the direct recomputation") {
    update_memberships(state, data);
    const Eigen::MatrixXd phi = state.phi;
    update_sticks(state);
    for (int c = 0; c < 2; ++c) {
      double mass = 0.0, tail = 0.0;
      for (int t = 0; t < data.m(); ++t) {
        mass += phi(t, c);
        for (int j = c + 1; j < 3; ++j) tail += phi(t, j);
      }
      CHECK(state.stick_a(c) == doctest::Approx(1.0 + mass).epsilon(1e-12));
      CHECK(state.stick_b(c) == doctest::Approx(state.tau1 / state.tau2 + tail).epsilon(1e-12));
    }
  }
}

TEST_CASE("alpha updates: empty sum at K=1, tau1 = 3.01 at K=4") {
  const auto tasks = random_tasks(3, 4, 2, 19);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  {
    HblrHyperParams hp = small_hp(1, 12);
    auto state = init_state(data, hp);
    update_alpha(state, hp);
    CHECK(state.tau1 == doctest::Approx(hp.tau10).epsilon(1e-15));
    CHECK(state.tau2 == doctest::Approx(hp.tau20).epsilon(1e-15));
  }
  {
    HblrHyperParams hp = small_hp(4, 12);  // tau10 = 0.01 default
    auto state = init_state(data, hp);
    update_alpha(state, hp);
    CHECK(state.tau1 == doctest::Approx(3.01).epsilon(1e-14));
    CHECK(state.tau2 >= hp.tau20);
    // digamma-based recomputation
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
      acc += boost::math::digamma(state.stick_b(c)) -
             boost::math::digamma(state.stick_a(c) + state.stick_b(c));
    CHECK(state.tau2 == doctest::Approx(hp.tau20 - acc).epsilon(1e-12));
  }
}

TEST_CASE("elbo matches the literal recomputation") {
  const auto tasks = random_tasks(4, 6, 3, 20);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  HblrHyperParams hp = small_hp(3, 13);
  auto state = init_state(data, hp);
  update_local_bounds(state, data);
  update_cluster_gaussians(state, data, hp);
  update_memberships(state, data);
  const double fast = elbo(state, data, hp);
  const double naive = oracles::naive_elbo(state, data, hp);
  CHECK(fast == doctest::Approx(naive).epsilon(1e-9));
}

TEST_CASE("every coordinate update is non-decreasing in the bound") {
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const int k = 1 + static_cast<int>(trial % 4);
    const auto tasks = random_tasks(2 + static_cast<int>(trial % 5), 8, 2 + static_cast<int>(trial % 4),
                                    300 + trial);
    const HblrDataset data = HblrDataset::from_tasks(tasks);
    HblrHyperParams hp = small_hp(k, 400 + trial);
    auto state = init_state(data, hp);
    double bound = elbo(state, data, hp);
    for (int sweep = 0; sweep < 3; ++sweep) {
      const auto step = [&](auto&& update, const char* name) {
        update();
        const double next = elbo(state, data, hp);
        INFO("update ", name, " trial ", trial, " sweep ", sweep);
        CHECK(next >= bound - 1e-8 * std::abs(bound));
        bound = next;
      };
      step([&] { update_local_bounds(state, data); }, "local-bounds");
      step([&] { update_cluster_gaussians(state, data, hp); }, "gaussians");
      step([&] { update_memberships(state, data); }, "memberships");
      step([&] { update_sticks(state); }, "sticks");
      step([&] { update_alpha(state, hp); }, "alpha");
    }
  }
}

TEST_CASE("zero-data bound is a negative KL that updates cannot decrease") {
  HblrDataset data;
  data.x.resize(0, 3);
  data.y.resize(0);
  HblrHyperParams hp = small_hp(3, 21);
  auto state = init_state(data, hp);
  double bound = elbo(state, data, hp);
  for (int sweep = 0; sweep < 30; ++sweep) {
    update_local_bounds(state, data);
    update_cluster_gaussians(state, data, hp);
    update_memberships(state, data);
    update_sticks(state);
    update_alpha(state, hp);
    const double next = elbo(state, data, hp);
    CHECK(next >= bound - 1e-10);
    bound = next;
  }
  CHECK(bound <= 1e-9);  // -KL(q || prior) <= 0
  // the Gaussian blocks sit exactly on their prior at the optimum
  for (int c = 0; c < 3; ++c) {
    CHECK(state.theta[static_cast<std::size_t>(c)].cwiseAbs().maxCoeff() < 1e-12);
    CHECK((state.gamma[static_cast<std::size_t>(c)] - hp.sigma2 * Eigen::MatrixXd::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("fit: bound trace is monotone and separable data reaches accuracy 1") {
  // two tasks, linearly separable in 2-D
  std::vector<TaskFeatureSet> tasks(2);
  Rng rng(77);
  for (int t = 0; t < 2; ++t) {
    tasks[t].task_id = "t" + std::to_string(t);
    tasks[t].x.resize(12, 2);
    tasks[t].y.resize(12);
    for (int i = 0; i < 12; ++i) {
      const int label = i % 2;
      tasks[t].y(i) = label;
      tasks[t].x(i, 0) = (label ? 2.0 : -2.0) + 0.3 * rng.normal();
      tasks[t].x(i, 1) = rng.normal();
    }
  }
  HblrHyperParams hp = small_hp(2, 31);
  const TrainedHblr model = fit(tasks, hp);
  for (std::size_t i = 1; i < model.bound_trace.size(); ++i)
    CHECK(model.bound_trace[i] >=
          model.bound_trace[i - 1] - 1e-8 * std::abs(model.bound_trace[i - 1]));
  int correct = 0, total = 0;
  for (const auto& task : tasks)
    for (int i = 0; i < task.y.size(); ++i) {
      const double p = predict_proba(model, task.task_id, task.x.row(i).transpose());
      correct += (p >= 0.5 ? 1 : 0) == task.y(i);
      ++total;
    }
  CHECK(correct == total);
}

TEST_CASE("K=1 fit agrees with pooled JJ-bound Bayesian logistic regression") {
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    const auto tasks = random_tasks(3, 6, 3, 500 + trial);
    const HblrDataset data = HblrDataset::from_tasks(tasks);
    HblrHyperParams hp = small_hp(1, 600 + trial);
    hp.rel_tol = 1e-13;
    hp.max_sweeps = 3000;
    const TrainedHblr model = fit(tasks, hp);

    const auto init = init_state(data, hp);
    const auto pooled = oracles::fit_pooled_vb_logreg(data.x, data.y, hp.sigma2, init.theta[0],
                                                      init.gamma[0], init.xi, 3000);
    Rng rng(700 + trial);
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::VectorXd x(3);
      for (int j = 0; j < 3; ++j) x(j) = rng.normal();
      const double a = predict_proba(model, tasks[0].task_id, x);
      const double b = oracles::pooled_vb_predict(pooled, x);
      CHECK(a == doctest::Approx(b).epsilon(1e-6));
    }
  }
}

TEST_CASE("prediction reduces to a sigmoid mixture when Gamma vanishes") {
  const auto tasks = random_tasks(2, 4, 2, 23);
  HblrHyperParams hp = small_hp(2, 14);
  TrainedHblr model = fit(tasks, hp);
  for (auto& ga : model.state.gamma) ga.setZero();
  Eigen::VectorXd x(2);
  x << 0.7, -0.3;
  const Eigen::VectorXd w = model.state.phi.row(0).transpose();
  double expect = 0.0;
  for (int c = 0; c < 2; ++c)
    expect += w(c) * oracles::sigmoid(model.state.theta[static_cast<std::size_t>(c)].dot(x));
  CHECK(predict_proba(model, model.task_ids[0], x) == doctest::Approx(expect).epsilon(1e-12));

  for (auto& th : model.state.theta) th.setZero();
  CHECK(predict_proba(model, model.task_ids[0], x) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("MacKay prediction stays close to the Monte-Carlo integral") {
  Rng rng(888);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + static_cast<int>(rng.integer(10));
    Eigen::VectorXd theta(d), x(d);
    for (int j = 0; j < d; ++j) {
      theta(j) = rng.normal();
      x(j) = rng.normal();
    }
    Eigen::MatrixXd a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
    Eigen::MatrixXd gamma = a * a.transpose() / d + 0.05 * Eigen::MatrixXd::Identity(d, d);
    // rescale to keep the predictive variance in the regime where the
    // approximation is accurate
    const double target_var = 0.05 + 2.4 * rng.uniform();
    gamma *= target_var / x.dot(gamma * x);
    const double target_mean = -6.0 + 12.0 * rng.uniform();
    theta *= target_mean / theta.dot(x);

    const double mean = theta.dot(x);
    const double var = x.dot(gamma * x);
    const double mackay = oracles::sigmoid(mean / std::sqrt(1.0 + M_PI / 8.0 * var));
    const double mc = oracles::mc_sigmoid_integral(mean, var, 1000000, 9000 + trial);
    CHECK(std::abs(mackay - mc) < 0.01);
  }
}

TEST_CASE("expected stick weights sum to one and feed cold-start prediction") {
  const auto tasks = random_tasks(4, 5, 2, 25);
  HblrHyperParams hp = small_hp(3, 15);
  TrainedHblr model = fit(tasks, hp);
  const Eigen::VectorXd weights = expected_stick_weights(model.state);
  CHECK(weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((weights.array() >= 0.0).all());

  Eigen::VectorXd x(2);
  x << 0.4, 0.2;
  CHECK_THROWS_AS(predict_proba(model, "unseen-task", x), DataError);
  model.hp.cold_start = true;
  const double p = predict_proba(model, "unseen-task", x);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("membership matrix is task-ordered, row-stochastic, M x K") {
  // paper-scale shape: 43 tasks, truncation 4
  std::vector<TaskFeatureSet> tasks;
  Rng rng(26);
  for (int t = 0; t < 43; ++t) {
    TaskFeatureSet set;
    set.task_id = "p" + std::to_string(t);
    set.x.resize(4, 2);
    set.y.resize(4);
    for (int i = 0; i < 4; ++i) {
      set.y(i) = i % 2;
      set.x(i, 0) = rng.normal() + set.y(i);
      set.x(i, 1) = rng.normal();
    }
    tasks.push_back(std::move(set));
  }
  HblrHyperParams hp = small_hp(4, 16);
  hp.max_sweeps = 30;
  const TrainedHblr model = fit(tasks, hp);
  const Eigen::MatrixXd phi = membership_matrix(model);
  CHECK(phi.rows() == 43);
  CHECK(phi.cols() == 4);
  for (int t = 0; t < 43; ++t) {
    CHECK(model.task_ids[static_cast<std::size_t>(t)] == tasks[static_cast<std::size_t>(t)].task_id);
    CHECK(phi.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("permuting task order permutes memberships and keeps predictions") {
  const auto tasks = random_tasks(5, 5, 3, 27);
  HblrHyperParams hp = small_hp(3, 17);
  hp.max_sweeps = 60;
  const TrainedHblr base = fit(tasks, hp);

  std::vector<TaskFeatureSet> permuted{tasks[3], tasks[0], tasks[4], tasks[1], tasks[2]};
  const TrainedHblr perm = fit(permuted, hp);
  Rng rng(28);
  for (std::size_t t = 0; t < permuted.size(); ++t) {
    const std::string& id = permuted[t].task_id;
    const int orig_row = base.task_index.at(id);
    CHECK((perm.state.phi.row(static_cast<Eigen::Index>(t)) - base.state.phi.row(orig_row))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x(j) = rng.normal();
    CHECK(predict_proba(perm, id, x) == doctest::Approx(predict_proba(base, id, x)).epsilon(1e-9));
  }
}

TEST_CASE("gamma stays SPD through sweeps (cholesky succeeds in elbo)") {
  const auto tasks = random_tasks(4, 8, 4, 29);
  const HblrDataset data = HblrDataset::from_tasks(tasks);
  HblrHyperParams hp = small_hp(3, 18);
  auto state = init_state(data, hp);
  for (int sweep = 0; sweep < 10; ++sweep) {
    update_local_bounds(state, data);
    update_cluster_gaussians(state, data, hp);
    update_memberships(state, data);
    update_sticks(state);
    update_alpha(state, hp);
    for (const auto& ga : state.gamma) {
      Eigen::LLT<Eigen::MatrixXd> llt(ga);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("hblr model file round-trips predictions exactly") {
  const auto tasks = random_tasks(3, 5, 3, 30);
  HblrHyperParams hp = small_hp(2, 19);
  hp.max_sweeps = 40;
  const TrainedHblr model = fit(tasks, hp);
  const auto path = std::filesystem::temp_directory_path() / "painmtl_hblr_rt.json";
  write_hblr_model(path, model);
  const TrainedHblr loaded = read_hblr_model(path);
  Rng rng(31);
  for (int probe = 0; probe < 10; ++probe) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x(j) = rng.normal();
    CHECK(predict_proba(model, model.task_ids[0], x) == predict_proba(loaded, loaded.task_ids[0], x));
  }
  CHECK(loaded.task_ids == model.task_ids);
  std::filesystem::remove(path);

  // feature-dimension mismatch is rejected
  Eigen::VectorXd bad(5);
  bad.setZero();
  CHECK_THROWS_AS(predict_proba(model, model.task_ids[0], bad), DataError);
}
