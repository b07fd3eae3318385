#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "ebhb/errors.hpp"

namespace ebhb {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream identified by (seed, stream_id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; it is seeded from a SplitMix64 expansion of the pair so that any
/// substream can be derived locally without coordination. Every variate
/// transform below is implemented here rather than taken from <random>, whose
/// distributions are implementation-defined. The draw sequence for a given
/// (seed, stream_id) is therefore identical across runs and standard libraries.
///
/// A stream is not thread-safe; give each task its own.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t sm = seed ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t st = stream_id ^ 0xbb67ae8584caa73bULL;
    std::array<std::uint32_t, 8> words{};
    for (std::size_t i = 0; i < 4; ++i) {
      std::uint64_t a = detail::splitmix64(sm);
      std::uint64_t b = detail::splitmix64(st);
      std::uint64_t w = a ^ (b * 0xd1342543de82ef95ULL + i);
      words[2 * i] = static_cast<std::uint32_t>(w);
      words[2 * i + 1] = static_cast<std::uint32_t>(w >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent stream keyed by (this stream's seed, stream_id, child).
  RngStream substream(std::uint64_t child) const {
    std::uint64_t s = stream_id_ * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL;
    std::uint64_t k = detail::splitmix64(s) ^ child;
    return RngStream(seed_, detail::splitmix64(k));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer on {0, ..., n-1}, unbiased (rejection on the top range).
  std::uint64_t uniform_index(std::uint64_t n) {
    detail::require(n > 0, "uniform_index: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal by the Marsaglia polar method (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform()); }

  /// Gamma(shape, rate): density proportional to x^(shape-1) exp(-rate x).
  double gamma(double shape, double rate = 1.0) {
    detail::require_positive(shape, "gamma shape");
    detail::require_positive(rate, "gamma rate");
    return standard_gamma(shape) / rate;
  }

  /// Inverse-gamma with density proportional to x^(-shape-1) exp(-scale / x).
  double inv_gamma(double shape, double scale) {
    detail::require_positive(shape, "inverse-gamma shape");
    detail::require_positive(scale, "inverse-gamma scale");
    return scale / standard_gamma(shape);
  }

  std::uint64_t poisson(double mean) {
    detail::require(std::isfinite(mean) && mean >= 0.0, "poisson mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::uint64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    // PTRS transformed rejection (Hormann 1993).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          -mean + k * loglam - std::lgamma(k + 1.0))
        return static_cast<std::uint64_t>(k);
    }
  }

  /// In-place Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  // Marsaglia-Tsang; shape < 1 boosted via U^(1/shape).
  double standard_gamma(double shape) {
    if (shape < 1.0) {
      const double g = standard_gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ebhb
