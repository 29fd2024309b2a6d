#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace painmtl {

enum class OnsetKind { noxious, baseline_marker };

std::string to_string(OnsetKind kind);
OnsetKind onset_kind_from_string(const std::string& s);

struct StimulusOnset {
  double time_s = 0.0;
  OnsetKind kind = OnsetKind::noxious;
};

// One task's multi-channel recording: relative HbO concentration in
// micromolar with arbitrary baseline offset. A baseline-marker onset opens a
// resting segment that extends to the next onset (or the end of the
// recording); noxious onsets mark stimulus deliveries.
struct RecordingSession {
  std::string task_id;
  double sampling_rate = 0.0;  // Hz
  double duration_s = 0.0;
  std::vector<StimulusOnset> onsets;
  std::vector<std::vector<double>> channels;  // channels x samples

  int n_channels() const { return static_cast<int>(channels.size()); }
  int n_samples() const { return channels.empty() ? 0 : static_cast<int>(channels.front().size()); }

  // Throws DataError on violated invariants: equal channel lengths, sample
  // count consistent with duration, sampling rate above the 1 Hz Nyquist
  // margin for 0.5 Hz content, onsets inside [0, duration].
  void validate() const;
};

// Fixed-duration slice with a binary pain label (1 = pain).
struct LabeledWindow {
  std::string task_id;
  int label = 0;
  double sampling_rate = 0.0;
  double window_s = 0.0;
  Eigen::MatrixXd samples;  // channels x T, T = round(window_s * sampling_rate)
};

// One label-1 window per noxious onset, starting at the onset, plus
// n_no_pain label-0 windows sampled without replacement (seeded) from the
// session's baseline segments. No-pain windows never overlap a pain window.
// Throws DataError when a pain window does not fit or when fewer than
// n_no_pain admissible baseline starts exist.
std::vector<LabeledWindow> extract_windows(const RecordingSession& session, double window_s,
                                           int n_no_pain, std::uint64_t seed);

// Sessions file: JSON-lines, one session object per line. Values round-trip
// at full binary64 precision.
void write_sessions(const std::filesystem::path& path, const std::vector<RecordingSession>& sessions);
std::vector<RecordingSession> read_sessions(const std::filesystem::path& path);

}  // namespace painmtl
