// painmtl command-line front end: synth, extract, train, eval, clusters.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "painmtl/config.hpp"
#include "painmtl/dataset.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/eval.hpp"
#include "painmtl/features.hpp"
#include "painmtl/hblr.hpp"
#include "painmtl/rng.hpp"
#include "painmtl/synth.hpp"
#include "painmtl/text.hpp"

namespace {

using namespace painmtl;

bool g_verbose = false;

void log_verbose(const std::string& msg) {
  if (g_verbose) std::cerr << "painmtl: " << msg << '\n';
}

void require_input_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("input file '" + path + "' does not exist");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  RunConfig load() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed_set) {
      cfg.seed = seed;
      cfg.synth.seed = seed;
    }
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file; flags override its values");
  cmd->add_option("--seed", args.seed, "root seed override")->each([&args](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_flag_callback("--verbose", [] { g_verbose = true; }, "log progress to stderr");
}

int cmd_synth(const CommonArgs& common, CLI::App* cmd, const std::string& out_path,
              const std::string& truth_path, int n_tasks, int n_clusters, int windows_per_class,
              int channels, double noise_sigma) {
  RunConfig cfg = common.load();
  if (cmd->count("--n-tasks")) cfg.synth.n_tasks = n_tasks;
  if (cmd->count("--clusters")) cfg.synth.n_clusters = n_clusters;
  if (cmd->count("--windows-per-class")) cfg.synth.windows_per_task_per_class = windows_per_class;
  if (cmd->count("--channels")) cfg.synth.channels = channels;
  if (cmd->count("--noise-sigma")) cfg.synth.noise_sigma_um = noise_sigma;
  cfg.synth.validate();

  const Cohort cohort = generate_cohort(cfg.synth);
  write_sessions(out_path, cohort.sessions);
  write_truth_map(truth_path, cohort.truth);

  const int windows = cfg.synth.n_tasks * cfg.synth.windows_per_task_per_class;
  std::cout << "synthesized " << cfg.synth.n_tasks << " tasks, " << cfg.synth.n_clusters
            << " ground-truth clusters, " << windows << " pain epochs, " << cfg.synth.channels
            << " channels at " << format_double(cfg.synth.sampling_rate_hz) << " Hz\n"
            << "sessions: " << out_path << "\ntruth map: " << truth_path << "\n";
  return 0;
}

int cmd_extract(const CommonArgs& common, CLI::App* cmd, const std::string& in_path,
                const std::string& out_path, double window_s, int n_no_pain, double w0, int voices) {
  RunConfig cfg = common.load();
  if (cmd->count("--window-s")) cfg.features.window_s = window_s;
  if (cmd->count("--n-no-pain")) cfg.features.n_no_pain_per_task = n_no_pain;
  if (cmd->count("--w0")) cfg.features.w0 = w0;
  if (cmd->count("--voices")) cfg.features.voices_per_octave = voices;
  cfg.features.validate();

  require_input_file(in_path);
  const auto sessions = read_sessions(in_path);
  if (sessions.empty()) throw DataError("sessions file '" + in_path + "' holds no sessions");

  const ScaleGrid grid = build_scale_grid(cfg.features.f_min_hz, cfg.features.f_max_hz,
                                          cfg.features.w0, cfg.features.voices_per_octave);
  FeatureExtractor extract(cfg.features.bands, grid, MorletParams{cfg.features.w0});

  std::vector<FeatureVector> rows;
  for (const auto& session : sessions) {
    log_verbose("extracting " + session.task_id);
    const auto windows = extract_windows(session, cfg.features.window_s,
                                         cfg.features.n_no_pain_per_task, cfg.seed);
    for (const auto& window : windows) rows.push_back(extract(window));
  }
  const FeatureTable table = to_table(rows);
  write_features_csv(out_path, table);
  std::cout << "extracted " << table.n_rows() << " windows x " << table.dimension()
            << " features from " << sessions.size() << " sessions\nfeatures: " << out_path << "\n";
  return 0;
}

ModelSpec model_spec_from_config(const RunConfig& cfg, const std::string& model_name) {
  ModelSpec spec;
  spec.kind = model_kind_from_string(model_name);
  spec.hblr = cfg.hblr;
  spec.lambda_grid = cfg.baselines.logreg_lambda_grid;
  spec.c_grid = cfg.baselines.svm_c_grid;
  spec.gamma_scale_grid = cfg.baselines.svm_gamma_scale_grid;
  spec.inner_folds = cfg.baselines.inner_folds;
  return spec;
}

struct HyperFlags {
  int k = 4;
  double tau10 = 0.01, tau20 = 0.1, sigma2 = 10.0, rel_tol = 1e-6;
  int max_sweeps = 500;
  double lambda = 1.0, c = 1.0, gamma = 0.0;
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& flags) {
  cmd->add_option("--k", flags.k, "hblr truncation level");
  cmd->add_option("--tau10", flags.tau10, "hblr concentration shape hyper-prior");
  cmd->add_option("--tau20", flags.tau20, "hblr concentration rate hyper-prior");
  cmd->add_option("--sigma2", flags.sigma2, "hblr prior variance");
  cmd->add_option("--max-sweeps", flags.max_sweeps, "hblr sweep cap");
  cmd->add_option("--rel-tol", flags.rel_tol, "hblr bound tolerance");
  cmd->add_option("--lambda", flags.lambda, "logreg penalty strength");
  cmd->add_option("--c", flags.c, "svm soft-margin C");
  cmd->add_option("--gamma", flags.gamma, "svm rbf gamma (default 1/D)");
}

void apply_hyper_flags(CLI::App* cmd, const HyperFlags& flags, ModelSpec& spec) {
  if (cmd->count("--k")) spec.hblr.k = flags.k;
  if (cmd->count("--tau10")) spec.hblr.tau10 = flags.tau10;
  if (cmd->count("--tau20")) spec.hblr.tau20 = flags.tau20;
  if (cmd->count("--sigma2")) spec.hblr.sigma2 = flags.sigma2;
  if (cmd->count("--max-sweeps")) spec.hblr.max_sweeps = flags.max_sweeps;
  if (cmd->count("--rel-tol")) spec.hblr.rel_tol = flags.rel_tol;
  if (cmd->count("--lambda")) spec.lambda = flags.lambda;
  if (cmd->count("--c")) spec.c = flags.c;
  if (cmd->count("--gamma")) spec.gamma = flags.gamma;
}

int cmd_train(const CommonArgs& common, CLI::App* cmd, const std::string& in_path,
              const std::string& model_name, const std::string& out_path, const HyperFlags& flags) {
  RunConfig cfg = common.load();
  ModelSpec spec = model_spec_from_config(cfg, model_name);
  apply_hyper_flags(cmd, flags, spec);
  spec.hblr.validate();

  require_input_file(in_path);
  const FeatureTable table = read_features_csv(in_path);
  if (table.n_rows() == 0) throw DataError("features file '" + in_path + "' holds no rows");

  const NormalizationStats stats = fit_normalizer(table.x);
  const Eigen::MatrixXd x = apply_normalizer(stats, table.x);
  const Eigen::VectorXi y = [&] {
    Eigen::VectorXi v(table.n_rows());
    for (int i = 0; i < table.n_rows(); ++i) v(i) = table.label[static_cast<std::size_t>(i)];
    return v;
  }();

  switch (spec.kind) {
    case ModelKind::hblr: {
      HblrHyperParams hp = spec.hblr;
      hp.seed = derive_seed(cfg.seed, "train/hblr");
      std::vector<TaskFeatureSet> tasks = group_by_task(table);
      for (auto& t : tasks) t.x = apply_normalizer(stats, t.x);
      const TrainedHblr model = fit(tasks, hp, stats);
      write_hblr_model(out_path, model);
      std::cout << "trained hblr (k=" << hp.k << ") on " << table.n_rows() << " rows, "
                << tasks.size() << " tasks, " << model.bound_trace.size() << " sweeps\nmodel: "
                << out_path << "\n";
      return 0;
    }
    case ModelKind::logreg_l1:
    case ModelKind::logreg_l2: {
      const double lambda = spec.lambda.value_or(1.0);
      LinearModel model = fit_logreg(
          x, y, spec.kind == ModelKind::logreg_l1 ? Penalty::l1 : Penalty::l2, lambda);
      model.normalization = stats;
      write_linear_model(out_path, model);
      std::cout << "trained " << to_string(spec.kind) << " (lambda=" << format_double(lambda)
                << ") on " << table.n_rows() << " rows\nmodel: " << out_path << "\n";
      return 0;
    }
    case ModelKind::svm_linear:
    case ModelKind::svm_rbf: {
      SvmConfig svm_cfg;
      svm_cfg.kernel = spec.kind == ModelKind::svm_rbf ? SvmKernel::rbf : SvmKernel::linear;
      svm_cfg.c = spec.c.value_or(1.0);
      svm_cfg.gamma = spec.kind == ModelKind::svm_rbf
                          ? spec.gamma.value_or(1.0 / table.dimension())
                          : 0.0;
      SvmModel model = fit_svm(x, y, svm_cfg);
      model.normalization = stats;
      write_svm_model(out_path, model);
      std::cout << "trained " << to_string(spec.kind) << " (C=" << format_double(svm_cfg.c)
                << ") on " << table.n_rows() << " rows, " << model.support_vectors.rows()
                << " support vectors\nmodel: " << out_path << "\n";
      return 0;
    }
  }
  return 1;
}

int cmd_eval(const CommonArgs& common, CLI::App* cmd, const std::string& in_path,
             const std::string& model_name, const std::string& out_path, const std::string& csv_path,
             int folds, bool no_balance, const HyperFlags& flags) {
  RunConfig cfg = common.load();
  ModelSpec spec = model_spec_from_config(cfg, model_name);
  apply_hyper_flags(cmd, flags, spec);
  if (cmd->count("--folds")) cfg.eval.folds = folds;
  if (cfg.eval.folds < 2) throw ConfigError("--folds must be at least 2");
  spec.hblr.validate();

  require_input_file(in_path);
  const FeatureTable table = read_features_csv(in_path);
  if (table.n_rows() == 0) throw DataError("features file '" + in_path + "' holds no rows");

  ExperimentOptions options;
  options.balance = cfg.eval.balance && !no_balance;
  log_verbose("running " + std::to_string(cfg.eval.folds) + "-fold cross-validation");
  const ExperimentReport report = run_experiment(table, spec, cfg.eval.folds, cfg.seed, options);

  write_text_file(out_path, report.to_json());
  if (!csv_path.empty()) write_text_file(csv_path, report.per_fold_csv());

  std::printf("%-12s %9s %10s %8s %8s\n", "model", "accuracy", "precision", "recall", "f1");
  std::printf("%-12s %9.4f %10.4f %8.4f %8.4f\n", report.model.c_str(), report.mean.accuracy,
              report.mean.precision, report.mean.recall, report.mean.f1);
  std::cout << "report: " << out_path << "\n";
  return 0;
}

int cmd_clusters(const std::string& model_path, const std::string& out_path,
                 const std::string& truth_path) {
  require_input_file(model_path);
  TrainedHblr model;
  try {
    model = read_hblr_model(model_path);
  } catch (const ParseError& e) {
    // A well-formed non-hblr model file is a usage error for this command.
    throw ConfigError(e.what());
  }
  const Eigen::MatrixXd phi = membership_matrix(model);

  std::ostringstream csv;
  csv << "task_id";
  for (Eigen::Index c = 0; c < phi.cols(); ++c) csv << ",phi_" << (c + 1);
  csv << '\n';
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    csv << model.task_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < phi.cols(); ++c) csv << ',' << format_double(phi(r, c));
    csv << '\n';
  }
  write_text_file(out_path, csv.str());
  std::cout << "memberships: " << out_path << " (" << phi.rows() << " tasks x " << phi.cols()
            << " clusters)\n";

  if (!truth_path.empty()) {
    require_input_file(truth_path);
    const auto truth = read_truth_map(truth_path);
    const double ari = cluster_recovery(phi, model.task_ids, truth);
    std::cout << "ARI " << format_double(ari) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pain-state detection from hemodynamic signals: synthetic cohorts, wavelet features,\n"
               "personalized multi-task classifiers and evaluation"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  std::string synth_out = "sessions.jsonl", synth_truth = "truth.json";
  int n_tasks = 40, n_clusters = 3, windows_per_class = 6, channels = 8;
  double noise_sigma = 0.2;
  add_common(synth, common);
  synth->add_option("--out", synth_out, "sessions output (JSON-lines)");
  synth->add_option("--truth-out", synth_truth, "ground-truth map output (JSON)");
  synth->add_option("--n-tasks", n_tasks, "number of tasks");
  synth->add_option("--clusters", n_clusters, "number of ground-truth clusters");
  synth->add_option("--windows-per-class", windows_per_class, "pain epochs per task");
  synth->add_option("--channels", channels, "channels per task");
  synth->add_option("--noise-sigma", noise_sigma, "white-noise sigma (micromolar)");

  auto* extract = app.add_subcommand("extract", "extract wavelet band features from sessions");
  std::string extract_in = "sessions.jsonl", extract_out = "features.csv";
  double window_s = 20.0, w0 = 6.0;
  int n_no_pain = 6, voices = 10;
  add_common(extract, common);
  extract->add_option("--in", extract_in, "sessions input (JSON-lines)");
  extract->add_option("--out", extract_out, "features output (CSV)");
  extract->add_option("--window-s", window_s, "window length in seconds");
  extract->add_option("--n-no-pain", n_no_pain, "no-pain windows per task");
  extract->add_option("--w0", w0, "Morlet central frequency");
  extract->add_option("--voices", voices, "voices per octave");

  auto* train = app.add_subcommand("train", "train one model on a features file");
  std::string train_in = "features.csv", train_model = "hblr", train_out = "model.json";
  HyperFlags train_flags;
  add_common(train, common);
  train->add_option("--in", train_in, "features input (CSV)");
  train->add_option("--model", train_model, "hblr|logreg-l1|logreg-l2|svm-linear|svm-rbf");
  train->add_option("--out", train_out, "model output (JSON)");
  add_hyper_flags(train, train_flags);

  auto* eval = app.add_subcommand("eval", "cross-validated evaluation of one model");
  std::string eval_in = "features.csv", eval_model = "hblr", eval_out = "report.json", eval_csv;
  int folds = 10;
  bool no_balance = false;
  HyperFlags eval_flags;
  add_common(eval, common);
  eval->add_option("--in", eval_in, "features input (CSV)");
  eval->add_option("--model", eval_model, "hblr|logreg-l1|logreg-l2|svm-linear|svm-rbf");
  eval->add_option("--out", eval_out, "report output (JSON)");
  eval->add_option("--csv-out", eval_csv, "per-fold metrics output (CSV)");
  eval->add_option("--folds", folds, "cross-validation folds");
  eval->add_flag("--no-balance", no_balance, "skip per-task class balancing");
  add_hyper_flags(eval, eval_flags);

  auto* clusters = app.add_subcommand("clusters", "export soft cluster memberships of an hblr model");
  std::string clusters_model = "model.json", clusters_out = "memberships.csv", clusters_truth;
  add_common(clusters, common);
  clusters->add_option("--model", clusters_model, "hblr model file (JSON)");
  clusters->add_option("--out", clusters_out, "membership output (CSV)");
  clusters->add_option("--truth", clusters_truth, "ground-truth map; prints the ARI when given");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(common, synth, synth_out, synth_truth, n_tasks, n_clusters,
                       windows_per_class, channels, noise_sigma);
    if (extract->parsed())
      return cmd_extract(common, extract, extract_in, extract_out, window_s, n_no_pain, w0, voices);
    if (train->parsed()) return cmd_train(common, train, train_in, train_model, train_out, train_flags);
    if (eval->parsed())
      return cmd_eval(common, eval, eval_in, eval_model, eval_out, eval_csv, folds, no_balance,
                      eval_flags);
    if (clusters->parsed()) return cmd_clusters(clusters_model, clusters_out, clusters_truth);
  } catch (const ConfigError& e) {
    std::cerr << "painmtl: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "painmtl: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "painmtl: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
