#pragma once

#include <Eigen/Core>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace painmtl {

// Morlet wavelet with admissibility correction:
//   psi(t) = c * pi^{-1/4} * exp(-t^2/2) * (exp(i*w0*t) - exp(-w0^2/2))
// where c = (1 + exp(-w0^2) - 2*exp(-3/4*w0^2))^{-1/2}.
struct MorletParams {
  double w0 = 6.0;  // central frequency, radians

  double normalization() const;  // c above
};

std::complex<double> morlet_eval(const MorletParams& params, double t);

// Geometric grid of wavelet dilations, ten voices per octave by default.
// Scales are ascending; row j has equivalent Fourier frequency
// f_j = w0 / (2*pi*a_j), so equivalent frequencies descend from f_max and the
// last one lands at or just below f_min.
struct ScaleGrid {
  std::vector<double> scales;  // seconds, ascending
  std::vector<double> equivalent_frequencies_hz;
  int voices_per_octave = 10;
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;
  double w0 = 6.0;

  std::size_t size() const { return scales.size(); }
};

ScaleGrid build_scale_grid(double f_min_hz, double f_max_hz, double w0 = 6.0, int voices_per_octave = 10);

struct Scalogram {
  Eigen::MatrixXd magnitudes;  // scales x time, |T(a,b)|
  ScaleGrid grid;
  double sampling_rate = 0.0;
};

// Precomputed kernel spectra for a fixed (grid, params, signal length,
// sampling rate). Immutable after construction; safe to share across threads.
class WaveletPlan {
 public:
  WaveletPlan(const ScaleGrid& grid, const MorletParams& params, int n_samples, double sampling_rate);

  int n_samples() const { return n_samples_; }
  double sampling_rate() const { return sampling_rate_; }
  const ScaleGrid& grid() const { return grid_; }

  // Complex coefficients T(a, b): the discretized transform
  //   T(a, b_m) = a^{-1/2} * sum_n x[n] * conj(psi)((n - m)/(a*fs)) / fs
  // with the signal zero-padded outside [0, N).
  Eigen::MatrixXcd coefficients(std::span<const double> signal) const;
  Scalogram transform(std::span<const double> signal) const;

 private:
  ScaleGrid grid_;
  MorletParams params_;
  int n_samples_;
  double sampling_rate_;
  int fft_size_;
  std::vector<std::vector<std::complex<double>>> kernel_spectra_;  // per scale
};

// One-shot helpers; build a plan internally.
Eigen::MatrixXcd cwt_coefficients(std::span<const double> signal, double sampling_rate,
                                  const ScaleGrid& grid, const MorletParams& params);
Scalogram cwt_transform(std::span<const double> signal, double sampling_rate, const ScaleGrid& grid,
                        const MorletParams& params);

// CSV dump for plotting: header row of times, one row per scale with the
// equivalent frequency in the first column.
std::string scalogram_csv(const Scalogram& scalogram);

}  // namespace painmtl
