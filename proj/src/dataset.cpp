#include "painmtl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/rng.hpp"

namespace painmtl {

std::string to_string(OnsetKind kind) {
  return kind == OnsetKind::noxious ? "noxious" : "baseline-marker";
}

OnsetKind onset_kind_from_string(const std::string& s) {
  if (s == "noxious") return OnsetKind::noxious;
  if (s == "baseline-marker") return OnsetKind::baseline_marker;
  throw ParseError("unknown onset kind '" + s + "'");
}

void RecordingSession::validate() const {
  if (task_id.empty()) throw DataError("session has empty task_id");
  if (!(sampling_rate > 1.0))
    throw DataError("session '" + task_id + "': sampling_rate must exceed 1 Hz (twice the 0.5 Hz band)");
  if (channels.empty()) throw DataError("session '" + task_id + "': no channels");
  const std::size_t n = channels.front().size();
  for (std::size_t c = 1; c < channels.size(); ++c) {
    if (channels[c].size() != n)
      throw DataError("session '" + task_id + "': channel " + std::to_string(c) + " has " +
                      std::to_string(channels[c].size()) + " samples, channel 0 has " + std::to_string(n));
  }
  if (n < 2) throw DataError("session '" + task_id + "': fewer than 2 samples");
  const long expected = std::llround(duration_s * sampling_rate);
  if (expected != static_cast<long>(n))
    throw DataError("session '" + task_id + "': duration " + std::to_string(duration_s) +
                    " s at " + std::to_string(sampling_rate) + " Hz implies " + std::to_string(expected) +
                    " samples, found " + std::to_string(n));
  for (const auto& onset : onsets) {
    if (!(onset.time_s >= 0.0) || !(onset.time_s <= duration_s))
      throw DataError("session '" + task_id + "': onset at " + std::to_string(onset.time_s) +
                      " s outside [0, " + std::to_string(duration_s) + "]");
  }
}

namespace {

struct SampleSpan {
  int begin = 0;  // inclusive sample index
  int end = 0;    // exclusive
};

bool overlaps(const SampleSpan& a, const SampleSpan& b) {
  return a.begin < b.end && b.begin < a.end;
}

LabeledWindow slice(const RecordingSession& s, int start, int t_len, int label, double window_s) {
  LabeledWindow w;
  w.task_id = s.task_id;
  w.label = label;
  w.sampling_rate = s.sampling_rate;
  w.window_s = window_s;
  w.samples.resize(s.n_channels(), t_len);
  for (int c = 0; c < s.n_channels(); ++c)
    for (int t = 0; t < t_len; ++t) w.samples(c, t) = s.channels[c][start + t];
  return w;
}

}  // namespace

std::vector<LabeledWindow> extract_windows(const RecordingSession& session, double window_s,
                                           int n_no_pain, std::uint64_t seed) {
  session.validate();
  if (!(window_s > 0.0)) throw DataError("window_s must be positive");
  if (n_no_pain < 0) throw DataError("n_no_pain must be non-negative");

  const double fs = session.sampling_rate;
  const int t_len = static_cast<int>(std::llround(window_s * fs));
  const int n_samples = session.n_samples();

  std::vector<SampleSpan> pain_spans;
  std::vector<LabeledWindow> out;
  for (const auto& onset : session.onsets) {
    if (onset.kind != OnsetKind::noxious) continue;
    const int start = static_cast<int>(std::llround(onset.time_s * fs));
    if (start < 0 || start + t_len > n_samples)
      throw DataError("session '" + session.task_id + "': pain window at onset " +
                      std::to_string(onset.time_s) + " s does not fit in the recording");
    pain_spans.push_back({start, start + t_len});
    out.push_back(slice(session, start, t_len, 1, window_s));
  }

  if (n_no_pain == 0) return out;

  // Baseline segments: from each baseline-marker to the next onset of any
  // kind (or end of recording). Without markers, the span before the first
  // noxious onset counts as baseline.
  std::vector<StimulusOnset> sorted = session.onsets;
  std::sort(sorted.begin(), sorted.end(),
            [](const StimulusOnset& a, const StimulusOnset& b) { return a.time_s < b.time_s; });
  std::vector<SampleSpan> baseline;
  bool any_marker = false;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].kind != OnsetKind::baseline_marker) continue;
    any_marker = true;
    const int begin = static_cast<int>(std::llround(sorted[i].time_s * fs));
    int end = n_samples;
    if (i + 1 < sorted.size()) end = static_cast<int>(std::llround(sorted[i + 1].time_s * fs));
    if (end > begin) baseline.push_back({begin, end});
  }
  if (!any_marker) {
    int end = n_samples;
    for (const auto& o : sorted)
      if (o.kind == OnsetKind::noxious) {
        end = static_cast<int>(std::llround(o.time_s * fs));
        break;
      }
    if (end > 0) baseline.push_back({0, end});
  }

  std::vector<int> admissible;
  for (const auto& seg : baseline) {
    for (int start = seg.begin; start + t_len <= seg.end; ++start) {
      SampleSpan w{start, start + t_len};
      bool clash = false;
      for (const auto& p : pain_spans)
        if (overlaps(w, p)) {
          clash = true;
          break;
        }
      if (!clash) admissible.push_back(start);
    }
  }
  if (static_cast<int>(admissible.size()) < n_no_pain)
    throw DataError("session '" + session.task_id + "': only " + std::to_string(admissible.size()) +
                    " admissible baseline starts for " + std::to_string(n_no_pain) + " no-pain windows");

  Rng rng(derive_seed(seed, "extract/" + session.task_id + "/no-pain"));
  rng.shuffle(admissible);
  std::vector<int> chosen(admissible.begin(), admissible.begin() + n_no_pain);
  std::sort(chosen.begin(), chosen.end());
  for (int start : chosen) out.push_back(slice(session, start, t_len, 0, window_s));
  return out;
}

namespace {

nlohmann::json session_to_json(const RecordingSession& s) {
  nlohmann::json j;
  j["task_id"] = s.task_id;
  j["sampling_rate"] = s.sampling_rate;
  j["duration_s"] = s.duration_s;
  auto onsets = nlohmann::json::array();
  for (const auto& o : s.onsets) onsets.push_back({{"time_s", o.time_s}, {"kind", to_string(o.kind)}});
  j["onsets"] = std::move(onsets);
  j["channels"] = s.channels;
  return j;
}

RecordingSession session_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto fail = [line_no](const std::string& what) -> ParseError {
    return ParseError("sessions file line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) throw fail("expected a JSON object");
  for (const char* key : {"task_id", "sampling_rate", "duration_s", "onsets", "channels"})
    if (!j.contains(key)) throw fail(std::string("missing field '") + key + "'");
  RecordingSession s;
  try {
    s.task_id = j.at("task_id").get<std::string>();
    s.sampling_rate = j.at("sampling_rate").get<double>();
    s.duration_s = j.at("duration_s").get<double>();
    for (const auto& o : j.at("onsets")) {
      StimulusOnset onset;
      onset.time_s = o.at("time_s").get<double>();
      onset.kind = onset_kind_from_string(o.at("kind").get<std::string>());
      s.onsets.push_back(onset);
    }
    s.channels = j.at("channels").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  try {
    s.validate();
  } catch (const DataError& e) {
    throw fail(e.what());
  }
  return s;
}

}  // namespace

void write_sessions(const std::filesystem::path& path, const std::vector<RecordingSession>& sessions) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::vector<RecordingSession> read_sessions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<RecordingSession> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("sessions file line " + std::to_string(line_no) + ": invalid JSON");
    sessions.push_back(session_from_json(j, line_no));
  }
  return sessions;
}

}  // namespace painmtl
