#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace painmtl {

// All randomness in the project flows from one root seed. Sub-streams are
// derived as derive_seed(root, tag) where the tag names the purpose, e.g.
// "synth/task/task007" or "eval/fold/3/hblr". Distinct tags give independent
// streams; the scheme is stable across platforms.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

// Deterministic random source. The raw engine is std::mt19937_64 but all
// distributions are implemented here so that sampled values do not depend on
// the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi). Degenerate ranges (lo == hi) return lo and still
  // consume one draw, keeping streams aligned across configurations.
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; pairs are cached.
  double normal();
  double normal(double mean, double sigma);
  // Uniform integer on [0, n), unbiased. n must be positive.
  std::uint64_t integer(std::uint64_t n);
  // +1 or -1 with equal probability.
  int sign();

  // Fisher-Yates shuffle using this stream.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(integer(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace painmtl
