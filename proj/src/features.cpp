#include "painmtl/features.hpp"

#include <cmath>
#include <fstream>

#include "painmtl/errors.hpp"
#include "painmtl/text.hpp"

namespace painmtl {

std::vector<BandDefinition> default_bands() {
  return {{"VLFO", 0.01, 0.08}, {"LFO", 0.08, 0.15}};
}

BandFeatures band_features(const Scalogram& scalogram, const BandDefinition& band) {
  if (!(band.f_low_hz > 0.0) || !(band.f_low_hz < band.f_high_hz))
    throw DataError("band '" + band.name + "' requires 0 < f_low < f_high");

  const auto& freqs = scalogram.grid.equivalent_frequencies_hz;
  std::vector<Eigen::Index> rows;
  for (std::size_t j = 0; j < freqs.size(); ++j)
    if (freqs[j] >= band.f_low_hz && freqs[j] <= band.f_high_hz)
      rows.push_back(static_cast<Eigen::Index>(j));
  if (rows.empty())
    throw DataError("band '" + band.name + "' does not intersect the scale grid");

  const auto& mags = scalogram.magnitudes;
  const Eigen::Index t_len = mags.cols();
  const double count = static_cast<double>(rows.size()) * static_cast<double>(t_len);

  BandFeatures f;
  double sum = 0.0, sum_sq = 0.0, maxv = 0.0;
  for (Eigen::Index r : rows) {
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const double v = mags(r, t);
      sum += v;
      sum_sq += v * v;
      if (v > maxv) maxv = v;
    }
  }
  f.mean = sum / count;
  f.max = maxv;
  f.stddev = std::sqrt(std::max(0.0, sum_sq / count - f.mean * f.mean));

  // m(b): in-band scale average per time column.
  Eigen::VectorXd m(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    double acc = 0.0;
    for (Eigen::Index r : rows) acc += mags(r, t);
    m(t) = acc / static_cast<double>(rows.size());
  }

  Eigen::Index argmax = 0;
  for (Eigen::Index t = 1; t < t_len; ++t)
    if (m(t) > m(argmax)) argmax = t;
  f.peak_location = t_len > 1 ? static_cast<double>(argmax) / static_cast<double>(t_len - 1) : 0.0;

  // OLS slope of m against time in seconds.
  const double fs = scalogram.sampling_rate;
  const double t_mean = (t_len - 1) / (2.0 * fs);
  const double m_mean = m.mean();
  double cov = 0.0, var = 0.0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double dt = t / fs - t_mean;
    cov += dt * (m(t) - m_mean);
    var += dt * dt;
  }
  f.slope = var > 0.0 ? cov / var : 0.0;
  return f;
}

namespace {

FeatureVector extract_with(const LabeledWindow& window, const std::vector<BandDefinition>& bands,
                           const WaveletPlan& plan) {
  const int n_channels = static_cast<int>(window.samples.rows());
  FeatureVector out;
  out.task_id = window.task_id;
  out.label = window.label;
  out.values.resize(5 * static_cast<Eigen::Index>(bands.size()) * n_channels);

  std::vector<double> signal(static_cast<std::size_t>(window.samples.cols()));
  Eigen::Index pos = 0;
  for (int c = 0; c < n_channels; ++c) {
    for (Eigen::Index t = 0; t < window.samples.cols(); ++t)
      signal[static_cast<std::size_t>(t)] = window.samples(c, t);
    const Scalogram scalogram = plan.transform(signal);
    for (const auto& band : bands) {
      const BandFeatures f = band_features(scalogram, band);
      out.values(pos++) = f.mean;
      out.values(pos++) = f.max;
      out.values(pos++) = f.stddev;
      out.values(pos++) = f.peak_location;
      out.values(pos++) = f.slope;
    }
  }
  return out;
}

}  // namespace

FeatureVector extract_features(const LabeledWindow& window, const std::vector<BandDefinition>& bands,
                               const ScaleGrid& grid, const MorletParams& params) {
  if (window.samples.rows() == 0 || window.samples.cols() < 2)
    throw DataError("window must have at least one channel and two samples");
  WaveletPlan plan(grid, params, static_cast<int>(window.samples.cols()), window.sampling_rate);
  return extract_with(window, bands, plan);
}

FeatureExtractor::FeatureExtractor(std::vector<BandDefinition> bands, ScaleGrid grid, MorletParams params)
    : bands_(std::move(bands)), grid_(std::move(grid)), params_(params) {}

FeatureVector FeatureExtractor::operator()(const LabeledWindow& window) {
  if (window.samples.rows() == 0 || window.samples.cols() < 2)
    throw DataError("window must have at least one channel and two samples");
  const std::pair<int, double> key{static_cast<int>(window.samples.cols()), window.sampling_rate};
  auto it = plans_.find(key);
  if (it == plans_.end())
    it = plans_.emplace(key, WaveletPlan(grid_, params_, key.first, key.second)).first;
  return extract_with(window, bands_, it->second);
}

NormalizationStats fit_normalizer(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw DataError("cannot fit a normalizer on zero rows");
  NormalizationStats stats;
  stats.mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - stats.mean.transpose();
  stats.stddev = (centered.array().square().colwise().mean()).sqrt();
  stats.stddev = stats.stddev.cwiseMax(1e-12);
  return stats;
}

NormalizationStats fit_normalizer(const std::vector<FeatureVector>& train) {
  if (train.empty()) throw DataError("cannot fit a normalizer on an empty training set");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(train.size()), train.front().values.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].values.size() != rows.cols())
      throw DataError("inconsistent feature dimension in normalizer input");
    rows.row(static_cast<Eigen::Index>(i)) = train[i].values;
  }
  return fit_normalizer(rows);
}

Eigen::VectorXd apply_normalizer(const NormalizationStats& stats, const Eigen::VectorXd& v) {
  if (v.size() != stats.mean.size()) throw DataError("feature dimension does not match normalizer");
  return (v - stats.mean).cwiseQuotient(stats.stddev);
}

Eigen::MatrixXd apply_normalizer(const NormalizationStats& stats, const Eigen::MatrixXd& rows) {
  if (rows.cols() != stats.mean.size()) throw DataError("feature dimension does not match normalizer");
  return (rows.rowwise() - stats.mean.transpose()).array().rowwise() /
         stats.stddev.transpose().array();
}

FeatureTable to_table(const std::vector<FeatureVector>& rows) {
  FeatureTable table;
  if (rows.empty()) return table;
  table.x.resize(static_cast<Eigen::Index>(rows.size()), rows.front().values.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != table.x.cols())
      throw DataError("inconsistent feature dimension across rows");
    table.task_id.push_back(rows[i].task_id);
    table.label.push_back(rows[i].label);
    table.x.row(static_cast<Eigen::Index>(i)) = rows[i].values;
  }
  return table;
}

void write_features_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "task_id,label";
  for (int d = 0; d < table.dimension(); ++d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ",f_%03d", d);
    out << buf;
  }
  out << '\n';
  for (int i = 0; i < table.n_rows(); ++i) {
    out << table.task_id[static_cast<std::size_t>(i)] << ',' << table.label[static_cast<std::size_t>(i)];
    for (int d = 0; d < table.dimension(); ++d) out << ',' << format_double(table.x(i, d));
    out << '\n';
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

FeatureTable read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("features file '" + path.string() + "': missing header");
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "task_id" || header[1] != "label")
    throw ParseError("features file '" + path.string() + "': header must start with task_id,label,f_000,...");
  const std::size_t dim = header.size() - 2;

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    const std::string where = "features file line " + std::to_string(line_no);
    if (fields.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    ids.push_back(fields[0]);
    const long label = parse_long(fields[1], where + ", field 'label'");
    if (label != 0 && label != 1) throw ParseError(where + ": label must be 0 or 1");
    labels.push_back(static_cast<int>(label));
    for (std::size_t d = 0; d < dim; ++d)
      values.push_back(parse_double(fields[2 + d], where + ", field '" + header[2 + d] + "'"));
  }

  FeatureTable table;
  table.task_id = std::move(ids);
  table.label = std::move(labels);
  table.x.resize(static_cast<Eigen::Index>(table.task_id.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < table.x.rows(); ++i)
    for (Eigen::Index d = 0; d < table.x.cols(); ++d)
      table.x(i, d) = values[static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(d)];
  return table;
}

std::vector<TaskFeatureSet> group_by_task(const FeatureTable& table) {
  std::vector<TaskFeatureSet> sets;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<int>> rows_per_task;
  for (int i = 0; i < table.n_rows(); ++i) {
    const auto& id = table.task_id[static_cast<std::size_t>(i)];
    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, sets.size());
      sets.push_back({id, {}, {}});
      rows_per_task.emplace_back();
      it = index.find(id);
    }
    rows_per_task[it->second].push_back(i);
  }
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const auto& rows = rows_per_task[t];
    sets[t].x.resize(static_cast<Eigen::Index>(rows.size()), table.x.cols());
    sets[t].y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sets[t].x.row(static_cast<Eigen::Index>(r)) = table.x.row(rows[r]);
      sets[t].y(static_cast<Eigen::Index>(r)) = table.label[static_cast<std::size_t>(rows[r])];
    }
  }
  return sets;
}

}  // namespace painmtl
