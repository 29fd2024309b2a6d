#include "painmtl/cwt.hpp"

#include <cmath>
#include <sstream>

#include "painmtl/errors.hpp"
#include "painmtl/text.hpp"

namespace painmtl {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Iterative radix-2 FFT, in place. size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double MorletParams::normalization() const {
  return 1.0 / std::sqrt(1.0 + std::exp(-w0 * w0) - 2.0 * std::exp(-0.75 * w0 * w0));
}

std::complex<double> morlet_eval(const MorletParams& params, double t) {
  const double envelope = params.normalization() * std::pow(kPi, -0.25) * std::exp(-0.5 * t * t);
  const std::complex<double> carrier(std::cos(params.w0 * t), std::sin(params.w0 * t));
  const double correction = std::exp(-0.5 * params.w0 * params.w0);
  return envelope * (carrier - correction);
}

ScaleGrid build_scale_grid(double f_min_hz, double f_max_hz, double w0, int voices_per_octave) {
  if (!(f_min_hz > 0.0) || !(f_min_hz < f_max_hz))
    throw DataError("scale grid requires 0 < f_min < f_max");
  if (!(w0 > 0.0)) throw DataError("w0 must be positive");
  if (voices_per_octave < 1) throw DataError("voices_per_octave must be at least 1");

  ScaleGrid grid;
  grid.voices_per_octave = voices_per_octave;
  grid.f_min_hz = f_min_hz;
  grid.f_max_hz = f_max_hz;
  grid.w0 = w0;

  const double octaves = std::log2(f_max_hz / f_min_hz);
  const int n = static_cast<int>(std::ceil(voices_per_octave * octaves)) + 1;
  const double a_min = w0 / (2.0 * kPi * f_max_hz);
  grid.scales.resize(n);
  grid.equivalent_frequencies_hz.resize(n);
  for (int j = 0; j < n; ++j) {
    grid.scales[j] = a_min * std::exp2(static_cast<double>(j) / voices_per_octave);
    grid.equivalent_frequencies_hz[j] = w0 / (2.0 * kPi * grid.scales[j]);
  }
  return grid;
}

WaveletPlan::WaveletPlan(const ScaleGrid& grid, const MorletParams& params, int n_samples,
                         double sampling_rate)
    : grid_(grid), params_(params), n_samples_(n_samples), sampling_rate_(sampling_rate) {
  if (n_samples < 2) throw DataError("signal length must be at least 2");
  if (!(sampling_rate > 0.0)) throw DataError("sampling rate must be positive");
  if (grid.scales.empty()) throw DataError("empty scale grid");

  // T[m] = sum_n x[n] g[m-n] with g[j] = conj(psi)(-j/(a*fs)) / (sqrt(a)*fs),
  // j in [-(N-1), N-1]. Linear convolution needs N + (2N-1) - 1 points.
  const int taps = 2 * n_samples_ - 1;
  fft_size_ = static_cast<int>(next_pow2(static_cast<std::size_t>(n_samples_ + taps - 1)));

  kernel_spectra_.resize(grid_.scales.size());
  for (std::size_t s = 0; s < grid_.scales.size(); ++s) {
    const double a = grid_.scales[s];
    const double norm = 1.0 / (std::sqrt(a) * sampling_rate_);
    std::vector<std::complex<double>> kernel(fft_size_, {0.0, 0.0});
    for (int j = -(n_samples_ - 1); j <= n_samples_ - 1; ++j) {
      // g stored with offset so index 0 holds j = -(N-1)
      kernel[j + n_samples_ - 1] = norm * std::conj(morlet_eval(params_, -j / (a * sampling_rate_)));
    }
    fft_inplace(kernel, false);
    kernel_spectra_[s] = std::move(kernel);
  }
}

Eigen::MatrixXcd WaveletPlan::coefficients(std::span<const double> signal) const {
  if (static_cast<int>(signal.size()) != n_samples_)
    throw DataError("signal length does not match the wavelet plan");

  std::vector<std::complex<double>> spectrum(fft_size_, {0.0, 0.0});
  for (int i = 0; i < n_samples_; ++i) spectrum[i] = signal[i];
  fft_inplace(spectrum, false);

  Eigen::MatrixXcd coeffs(static_cast<Eigen::Index>(grid_.scales.size()), n_samples_);
  std::vector<std::complex<double>> prod(fft_size_);
  for (std::size_t s = 0; s < grid_.scales.size(); ++s) {
    const auto& kernel = kernel_spectra_[s];
    for (int i = 0; i < fft_size_; ++i) prod[i] = spectrum[i] * kernel[i];
    fft_inplace(prod, true);
    // convolution index m + (N-1) corresponds to output time m
    for (int m = 0; m < n_samples_; ++m) coeffs(static_cast<Eigen::Index>(s), m) = prod[m + n_samples_ - 1];
  }
  return coeffs;
}

Scalogram WaveletPlan::transform(std::span<const double> signal) const {
  Scalogram scalogram;
  scalogram.grid = grid_;
  scalogram.sampling_rate = sampling_rate_;
  scalogram.magnitudes = coefficients(signal).cwiseAbs();
  return scalogram;
}

Eigen::MatrixXcd cwt_coefficients(std::span<const double> signal, double sampling_rate,
                                  const ScaleGrid& grid, const MorletParams& params) {
  if (signal.empty()) throw DataError("empty signal");
  WaveletPlan plan(grid, params, static_cast<int>(signal.size()), sampling_rate);
  return plan.coefficients(signal);
}

Scalogram cwt_transform(std::span<const double> signal, double sampling_rate, const ScaleGrid& grid,
                        const MorletParams& params) {
  if (signal.empty()) throw DataError("empty signal");
  WaveletPlan plan(grid, params, static_cast<int>(signal.size()), sampling_rate);
  return plan.transform(signal);
}

std::string scalogram_csv(const Scalogram& scalogram) {
  std::ostringstream out;
  const auto& mags = scalogram.magnitudes;
  out << "freq_hz";
  for (Eigen::Index t = 0; t < mags.cols(); ++t)
    out << ',' << format_double(t / scalogram.sampling_rate);
  out << '\n';
  for (Eigen::Index s = 0; s < mags.rows(); ++s) {
    out << format_double(scalogram.grid.equivalent_frequencies_hz[static_cast<std::size_t>(s)]);
    for (Eigen::Index t = 0; t < mags.cols(); ++t) out << ',' << format_double(mags(s, t));
    out << '\n';
  }
  return out.str();
}

}  // namespace painmtl
