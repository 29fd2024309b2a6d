#include "painmtl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/rng.hpp"
#include "painmtl/text.hpp"

namespace painmtl {

namespace {

FeatureTable subset(const FeatureTable& table, std::span<const int> rows) {
  FeatureTable out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), table.x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.task_id.push_back(table.task_id[static_cast<std::size_t>(rows[r])]);
    out.label.push_back(table.label[static_cast<std::size_t>(rows[r])]);
    out.x.row(static_cast<Eigen::Index>(r)) = table.x.row(rows[r]);
  }
  return out;
}

// Task ids in order of first appearance with their row lists.
std::vector<std::pair<std::string, std::vector<int>>> rows_by_task(const FeatureTable& table) {
  std::vector<std::pair<std::string, std::vector<int>>> tasks;
  std::map<std::string, std::size_t> index;
  for (int i = 0; i < table.n_rows(); ++i) {
    const auto& id = table.task_id[static_cast<std::size_t>(i)];
    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, tasks.size());
      tasks.push_back({id, {}});
      it = index.find(id);
    }
    tasks[it->second].second.push_back(i);
  }
  return tasks;
}

}  // namespace

FeatureTable balance_downsample(const FeatureTable& table, std::uint64_t seed) {
  std::vector<char> keep(static_cast<std::size_t>(table.n_rows()), 1);
  for (const auto& [task_id, rows] : rows_by_task(table)) {
    std::vector<int> by_class[2];
    for (int r : rows) by_class[table.label[static_cast<std::size_t>(r)]].push_back(r);
    if (by_class[0].empty() || by_class[1].empty())
      throw DataError("task '" + task_id + "' is missing one class, cannot balance");
    const int larger = by_class[0].size() > by_class[1].size() ? 0 : 1;
    const std::size_t target = by_class[1 - larger].size();
    if (by_class[larger].size() == target) continue;
    Rng rng(derive_seed(seed, "balance/" + task_id));
    rng.shuffle(by_class[larger]);
    for (std::size_t i = target; i < by_class[static_cast<std::size_t>(larger)].size(); ++i)
      keep[static_cast<std::size_t>(by_class[larger][i])] = 0;
  }
  std::vector<int> kept;
  for (int i = 0; i < table.n_rows(); ++i)
    if (keep[static_cast<std::size_t>(i)]) kept.push_back(i);
  return subset(table, kept);
}

std::vector<int> FoldPlan::train_rows(int fold, int n_rows) const {
  std::vector<char> in_test(static_cast<std::size_t>(n_rows), 0);
  for (int r : test_rows[static_cast<std::size_t>(fold)]) in_test[static_cast<std::size_t>(r)] = 1;
  std::vector<int> rows;
  for (int i = 0; i < n_rows; ++i)
    if (!in_test[static_cast<std::size_t>(i)]) rows.push_back(i);
  return rows;
}

FoldPlan make_folds(const FeatureTable& table, int k, std::uint64_t seed) {
  if (table.n_rows() == 0) throw DataError("cannot build folds over an empty table");
  if (k < 2) throw DataError("fold count must be at least 2");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.test_rows.assign(static_cast<std::size_t>(k), {});
  for (const auto& [task_id, rows] : rows_by_task(table)) {
    Rng rng(derive_seed(seed, "folds/" + task_id));
    // Random fold offset per task so fold sizes even out across the cohort;
    // a continuing cursor across classes keeps per-task test sizes within one
    // of each other while stratifying labels.
    int cursor = static_cast<int>(rng.integer(static_cast<std::uint64_t>(k)));
    for (int cls = 1; cls >= 0; --cls) {
      std::vector<int> class_rows;
      for (int r : rows)
        if (table.label[static_cast<std::size_t>(r)] == cls) class_rows.push_back(r);
      rng.shuffle(class_rows);
      for (int r : class_rows) {
        plan.test_rows[static_cast<std::size_t>(cursor)].push_back(r);
        cursor = (cursor + 1) % k;
      }
    }
  }
  for (auto& fold : plan.test_rows) std::sort(fold.begin(), fold.end());
  return plan;
}

Metrics compute_metrics(std::span<const double> predictions, std::span<const int> labels,
                        double threshold) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw DataError("metrics require equal-length, non-empty predictions and labels");
  Metrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int predicted = predictions[i] >= threshold ? 1 : 0;
    const int actual = labels[i];
    if (predicted == 1 && actual == 1) ++m.tp;
    else if (predicted == 1 && actual == 0) ++m.fp;
    else if (predicted == 0 && actual == 1) ++m.fn;
    else ++m.tn;
  }
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const double total = static_cast<double>(predictions.size());
  m.accuracy = (m.tp + m.tn) / total;
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  const double precision0 = ratio(m.tn, m.tn + m.fn);
  const double recall0 = ratio(m.tn, m.tn + m.fp);
  const double f10 = ratio(2.0 * precision0 * recall0, precision0 + recall0);
  m.macro_precision = 0.5 * (m.precision + precision0);
  m.macro_recall = 0.5 * (m.recall + recall0);
  m.macro_f1 = 0.5 * (m.f1 + f10);
  return m;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::hblr: return "hblr";
    case ModelKind::logreg_l1: return "logreg-l1";
    case ModelKind::logreg_l2: return "logreg-l2";
    case ModelKind::svm_linear: return "svm-linear";
    case ModelKind::svm_rbf: return "svm-rbf";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "hblr") return ModelKind::hblr;
  if (name == "logreg-l1") return ModelKind::logreg_l1;
  if (name == "logreg-l2") return ModelKind::logreg_l2;
  if (name == "svm-linear") return ModelKind::svm_linear;
  if (name == "svm-rbf") return ModelKind::svm_rbf;
  throw ConfigError("unknown model '" + name + "'");
}

namespace {

Eigen::VectorXi labels_of(const FeatureTable& table) {
  Eigen::VectorXi y(table.n_rows());
  for (int i = 0; i < table.n_rows(); ++i) y(i) = table.label[static_cast<std::size_t>(i)];
  return y;
}

std::vector<TaskFeatureSet> normalized_task_sets(const FeatureTable& table,
                                                 const Eigen::MatrixXd& x_normalized) {
  std::vector<TaskFeatureSet> sets;
  for (const auto& [task_id, rows] : rows_by_task(table)) {
    TaskFeatureSet set;
    set.task_id = task_id;
    set.x.resize(static_cast<Eigen::Index>(rows.size()), x_normalized.cols());
    set.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      set.x.row(static_cast<Eigen::Index>(r)) = x_normalized.row(rows[r]);
      set.y(static_cast<Eigen::Index>(r)) = table.label[static_cast<std::size_t>(rows[r])];
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

struct FittedModel {
  std::optional<TrainedHblr> hblr;
  std::optional<LinearModel> linear;
  std::optional<SvmModel> svm;
};

double accuracy_on(const std::vector<double>& preds, const std::vector<int>& labels) {
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if ((preds[i] >= 0.5 ? 1 : 0) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// Fits on the (already normalized) training table; prediction is a
// probability for logreg/hblr and a 0/1 indicator for svm.
FittedModel fit_model(const FeatureTable& train, const Eigen::MatrixXd& x_train,
                      const ModelSpec& spec, double lambda, double c, double gamma,
                      std::uint64_t hblr_seed) {
  FittedModel fitted;
  switch (spec.kind) {
    case ModelKind::hblr: {
      HblrHyperParams hp = spec.hblr;
      hp.seed = hblr_seed;
      fitted.hblr = fit(normalized_task_sets(train, x_train), hp);
      break;
    }
    case ModelKind::logreg_l1:
      fitted.linear = fit_logreg(x_train, labels_of(train), Penalty::l1, lambda);
      break;
    case ModelKind::logreg_l2:
      fitted.linear = fit_logreg(x_train, labels_of(train), Penalty::l2, lambda);
      break;
    case ModelKind::svm_linear:
    case ModelKind::svm_rbf: {
      SvmConfig cfg;
      cfg.kernel = spec.kind == ModelKind::svm_rbf ? SvmKernel::rbf : SvmKernel::linear;
      cfg.c = c;
      cfg.gamma = gamma;
      fitted.svm = fit_svm(x_train, labels_of(train), cfg);
      break;
    }
  }
  return fitted;
}

double predict_one(const FittedModel& fitted, const std::string& task_id, const Eigen::VectorXd& x) {
  if (fitted.hblr) return predict_proba(*fitted.hblr, task_id, x);
  if (fitted.linear) return predict_proba(*fitted.linear, x);
  return predict(*fitted.svm, x).label ? 1.0 : 0.0;
}

struct HyperChoice {
  double lambda = 0.0;
  double c = 0.0;
  double gamma = 0.0;
  std::string note;
};

// Inner cross-validation over the spec's grids on the training split.
HyperChoice choose_hyper(const FeatureTable& train, const ModelSpec& spec, std::uint64_t seed) {
  HyperChoice choice;
  const int d = train.dimension();
  if (spec.kind == ModelKind::hblr) return choice;

  std::vector<std::array<double, 3>> candidates;  // lambda, c, gamma
  if (spec.kind == ModelKind::logreg_l1 || spec.kind == ModelKind::logreg_l2) {
    if (spec.lambda) {
      choice.lambda = *spec.lambda;
      return choice;
    }
    for (double l : spec.lambda_grid) candidates.push_back({l, 0.0, 0.0});
  } else {
    const bool needs_c = !spec.c.has_value();
    const bool needs_gamma = spec.kind == ModelKind::svm_rbf && !spec.gamma.has_value();
    if (!needs_c && !needs_gamma) {
      choice.c = *spec.c;
      choice.gamma = spec.gamma.value_or(0.0);
      return choice;
    }
    const std::vector<double> cs = needs_c ? spec.c_grid : std::vector<double>{*spec.c};
    std::vector<double> gammas{0.0};
    if (spec.kind == ModelKind::svm_rbf) {
      gammas.clear();
      if (needs_gamma)
        for (double s : spec.gamma_scale_grid) gammas.push_back(s / d);
      else
        gammas.push_back(*spec.gamma);
    }
    for (double cv : cs)
      for (double gv : gammas) candidates.push_back({0.0, cv, gv});
  }

  if (candidates.size() == 1) {
    choice.lambda = candidates[0][0];
    choice.c = candidates[0][1];
    choice.gamma = candidates[0][2];
    return choice;
  }

  const int k = std::min(spec.inner_folds, 2 + train.n_rows() / 4);
  const FoldPlan inner = make_folds(train, std::max(2, k), derive_seed(seed, "inner-folds"));
  double best_acc = -1.0;
  std::array<double, 3> best = candidates.front();
  for (const auto& cand : candidates) {
    std::vector<double> preds;
    std::vector<int> labels;
    for (int f = 0; f < inner.k; ++f) {
      if (inner.test_rows[static_cast<std::size_t>(f)].empty()) continue;
      const auto train_rows = inner.train_rows(f, train.n_rows());
      const FeatureTable inner_train = subset(train, train_rows);
      const NormalizationStats stats = fit_normalizer(inner_train.x);
      const Eigen::MatrixXd x_train = apply_normalizer(stats, inner_train.x);
      FittedModel fitted;
      try {
        fitted = fit_model(inner_train, x_train, spec, cand[0], cand[1], cand[2], 0);
      } catch (const DataError&) {
        continue;  // degenerate inner split (single class); skip this fold
      }
      for (int r : inner.test_rows[static_cast<std::size_t>(f)]) {
        const Eigen::VectorXd x = apply_normalizer(stats, Eigen::VectorXd(train.x.row(r).transpose()));
        preds.push_back(predict_one(fitted, train.task_id[static_cast<std::size_t>(r)], x));
        labels.push_back(train.label[static_cast<std::size_t>(r)]);
      }
    }
    const double acc = preds.empty() ? 0.0 : accuracy_on(preds, labels);
    if (acc > best_acc) {
      best_acc = acc;
      best = cand;
    }
  }
  choice.lambda = best[0];
  choice.c = best[1];
  choice.gamma = best[2];
  std::ostringstream note;
  if (spec.kind == ModelKind::logreg_l1 || spec.kind == ModelKind::logreg_l2)
    note << "lambda=" << format_double(best[0]);
  else {
    note << "C=" << format_double(best[1]);
    if (spec.kind == ModelKind::svm_rbf) note << " gamma=" << format_double(best[2]);
  }
  choice.note = note.str();
  return choice;
}

}  // namespace

ExperimentReport run_experiment(const FeatureTable& table, const ModelSpec& spec, int folds,
                                std::uint64_t seed, const ExperimentOptions& options) {
  if (table.n_rows() == 0) throw DataError("experiment requires a non-empty feature table");
  if (spec.kind == ModelKind::hblr) spec.hblr.validate();

  const FeatureTable data =
      options.balance ? balance_downsample(table, derive_seed(seed, "eval/balance")) : table;
  const FoldPlan plan = make_folds(data, folds, derive_seed(seed, "eval/folds"));

  ExperimentReport report;
  report.model = to_string(spec.kind);
  report.seed = seed;
  report.folds = folds;
  report.balanced = options.balance;
  report.per_fold.resize(static_cast<std::size_t>(folds));

  auto run_fold = [&](int f) -> FoldResult {
    FoldResult result;
    result.fold = f;
    const auto& test_rows = plan.test_rows[static_cast<std::size_t>(f)];
    if (test_rows.empty()) return result;
    const auto train_rows = plan.train_rows(f, data.n_rows());
    const FeatureTable train = subset(data, train_rows);

    const HyperChoice hyper = choose_hyper(train, spec, derive_seed(seed, "eval/fold/" + std::to_string(f)));
    result.hyper_note = hyper.note;

    const NormalizationStats stats = fit_normalizer(train.x);
    const Eigen::MatrixXd x_train = apply_normalizer(stats, train.x);
    const FittedModel fitted = fit_model(train, x_train, spec, hyper.lambda, hyper.c, hyper.gamma,
                                         derive_seed(seed, "eval/fold/" + std::to_string(f) + "/hblr"));

    std::vector<double> preds;
    std::vector<int> labels;
    for (int r : test_rows) {
      const Eigen::VectorXd x = apply_normalizer(stats, Eigen::VectorXd(data.x.row(r).transpose()));
      preds.push_back(predict_one(fitted, data.task_id[static_cast<std::size_t>(r)], x));
      labels.push_back(data.label[static_cast<std::size_t>(r)]);
    }
    result.metrics = compute_metrics(preds, labels);
    return result;
  };

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, folds));
  if (threads == 1) {
    for (int f = 0; f < folds; ++f) report.per_fold[static_cast<std::size_t>(f)] = run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    for (int t = 0; t < threads; ++t)
      workers.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const int f = next.fetch_add(1);
          if (f >= folds) return;
          report.per_fold[static_cast<std::size_t>(f)] = run_fold(f);
        }
      }));
    for (auto& w : workers) w.get();
  }

  // Aggregates: mean and population std of the metric fields across folds
  // with a non-empty test set; confusion counts sum across folds.
  std::vector<const FoldResult*> scored;
  for (const auto& r : report.per_fold)
    if (r.metrics.tp + r.metrics.fp + r.metrics.fn + r.metrics.tn > 0) scored.push_back(&r);
  const double n = static_cast<double>(scored.size());
  auto add_field = [&](double Metrics::* field) {
    double mean = 0.0, var = 0.0;
    for (const auto* r : scored) mean += r->metrics.*field;
    mean /= n;
    for (const auto* r : scored) {
      const double d = r->metrics.*field - mean;
      var += d * d;
    }
    report.mean.*field = mean;
    report.stddev.*field = std::sqrt(var / n);
  };
  if (!scored.empty()) {
    add_field(&Metrics::accuracy);
    add_field(&Metrics::precision);
    add_field(&Metrics::recall);
    add_field(&Metrics::f1);
    add_field(&Metrics::macro_precision);
    add_field(&Metrics::macro_recall);
    add_field(&Metrics::macro_f1);
    for (const auto* r : scored) {
      report.mean.tp += r->metrics.tp;
      report.mean.fp += r->metrics.fp;
      report.mean.fn += r->metrics.fn;
      report.mean.tn += r->metrics.tn;
    }
  }

  if (spec.kind == ModelKind::hblr) {
    const NormalizationStats stats = fit_normalizer(data.x);
    const Eigen::MatrixXd x_all = apply_normalizer(stats, data.x);
    HblrHyperParams hp = spec.hblr;
    hp.seed = derive_seed(seed, "eval/full/hblr");
    const TrainedHblr full = fit(normalized_task_sets(data, x_all), hp, stats);
    report.task_ids = full.task_ids;
    report.memberships = membership_matrix(full);
  }
  return report;
}

namespace {

nlohmann::json metrics_to_json(const Metrics& m, bool with_counts) {
  nlohmann::json j{{"accuracy", m.accuracy},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"macro_precision", m.macro_precision},
                   {"macro_recall", m.macro_recall},
                   {"macro_f1", m.macro_f1}};
  if (with_counts) {
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["tn"] = m.tn;
  }
  return j;
}

}  // namespace

std::string ExperimentReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["seed"] = seed;
  j["folds"] = folds;
  j["balanced"] = balanced;
  auto fold_entries = nlohmann::json::array();
  for (const auto& r : per_fold) {
    nlohmann::json e = metrics_to_json(r.metrics, true);
    e["fold"] = r.fold;
    if (!r.hyper_note.empty()) e["hyper"] = r.hyper_note;
    fold_entries.push_back(std::move(e));
  }
  j["per_fold"] = std::move(fold_entries);
  j["mean"] = metrics_to_json(mean, true);
  j["stddev"] = metrics_to_json(stddev, false);
  if (memberships.size() > 0) {
    j["task_ids"] = task_ids;
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < memberships.rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < memberships.cols(); ++c) row.push_back(memberships(r, c));
      rows.push_back(std::move(row));
    }
    j["memberships"] = std::move(rows);
  }
  return j.dump(2) + "\n";
}

std::string ExperimentReport::per_fold_csv() const {
  std::ostringstream out;
  out << "fold,accuracy,precision,recall,f1,macro_precision,macro_recall,macro_f1,tp,fp,fn,tn,hyper\n";
  for (const auto& r : per_fold) {
    const auto& m = r.metrics;
    out << r.fold << ',' << format_double(m.accuracy) << ',' << format_double(m.precision) << ','
        << format_double(m.recall) << ',' << format_double(m.f1) << ','
        << format_double(m.macro_precision) << ',' << format_double(m.macro_recall) << ','
        << format_double(m.macro_f1) << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn
        << ',' << r.hyper_note << '\n';
  }
  return out.str();
}

std::string ExperimentReport::membership_csv() const {
  std::ostringstream out;
  out << "task_id";
  for (Eigen::Index c = 0; c < memberships.cols(); ++c) out << ",phi_" << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < memberships.rows(); ++r) {
    out << task_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < memberships.cols(); ++c) out << ',' << format_double(memberships(r, c));
    out << '\n';
  }
  return out.str();
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) throw DataError("ARI requires equal-length, non-empty labelings");
  std::map<int, int> ids_a, ids_b;
  for (int v : a) ids_a.emplace(v, static_cast<int>(ids_a.size()));
  for (int v : b) ids_b.emplace(v, static_cast<int>(ids_b.size()));
  Eigen::MatrixXd contingency = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ids_a.size()),
                                                      static_cast<Eigen::Index>(ids_b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    contingency(ids_a[a[i]], ids_b[b[i]]) += 1.0;

  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_cells = 0.0;
  for (Eigen::Index r = 0; r < contingency.rows(); ++r)
    for (Eigen::Index c = 0; c < contingency.cols(); ++c) sum_cells += comb2(contingency(r, c));
  double sum_rows = 0.0, sum_cols = 0.0;
  for (Eigen::Index r = 0; r < contingency.rows(); ++r) sum_rows += comb2(contingency.row(r).sum());
  for (Eigen::Index c = 0; c < contingency.cols(); ++c) sum_cols += comb2(contingency.col(c).sum());
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;  // both partitions degenerate and identical
  return (sum_cells - expected) / (maximum - expected);
}

double cluster_recovery(const Eigen::MatrixXd& memberships, const std::vector<std::string>& task_ids,
                        const std::map<std::string, int>& truth) {
  if (memberships.rows() != static_cast<Eigen::Index>(task_ids.size()))
    throw DataError("membership rows and task ids disagree");
  std::vector<int> predicted, actual;
  for (std::size_t t = 0; t < task_ids.size(); ++t) {
    auto it = truth.find(task_ids[t]);
    if (it == truth.end()) throw DataError("task '" + task_ids[t] + "' missing from the truth map");
    Eigen::Index argmax = 0;
    for (Eigen::Index c = 1; c < memberships.cols(); ++c)
      if (memberships(static_cast<Eigen::Index>(t), c) > memberships(static_cast<Eigen::Index>(t), argmax))
        argmax = c;
    predicted.push_back(static_cast<int>(argmax));
    actual.push_back(it->second);
  }
  if (truth.size() != task_ids.size())
    throw DataError("truth map and membership task sets differ in size");
  return adjusted_rand_index(predicted, actual);
}

}  // namespace painmtl
