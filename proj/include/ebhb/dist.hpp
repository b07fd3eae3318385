#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include "ebhb/errors.hpp"

namespace ebhb {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

/// Gamma distribution in shape/rate form: density proportional to
/// lambda^(shape-1) exp(-rate * lambda). The conjugate Poisson update with
/// exposure e and count n is (shape + n, rate + e).
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return shape / rate; }

  void validate() const {
    detail::require_positive(shape, "gamma shape");
    detail::require_positive(rate, "gamma rate");
  }

  friend bool operator==(const GammaParams&, const GammaParams&) = default;
};

inline double normal_logpdf(double x, double mean, double sd) {
  detail::require_finite(x, "normal_logpdf x");
  detail::require_finite(mean, "normal_logpdf mean");
  detail::require_positive(sd, "normal_logpdf sd");
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

/// Digamma by upward recurrence to z >= 6 followed by the asymptotic series.
inline double digamma(double z) {
  if (!std::isfinite(z) || !(z > 0.0)) throw DomainError("digamma requires z > 0");
  double acc = 0.0;
  while (z < 10.0) {
    acc -= 1.0 / z;
    z += 1.0;
  }
  const double r = 1.0 / (z * z);
  // Bernoulli terms B_2k / (2k z^2k), k = 1..7.
  const double series =
      r * (1.0 / 12.0 -
           r * (1.0 / 120.0 -
                r * (1.0 / 252.0 -
                     r * (1.0 / 240.0 -
                          r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r * (1.0 / 12.0)))))));
  return acc + std::log(z) - 0.5 / z - series;
}

/// log NB(n; size, prob) = log[C(n+size-1, n) prob^size (1-prob)^n].
inline double nb_logpmf(std::uint64_t n, double size, double prob) {
  detail::require_positive(size, "nb_logpmf size");
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("nb_logpmf requires 0 < prob < 1");
  const double dn = static_cast<double>(n);
  double out = size * std::log(prob);
  if (n > 0)
    out += std::lgamma(dn + size) - std::lgamma(size) - std::lgamma(dn + 1.0) +
           dn * std::log1p(-prob);
  return out;
}

/// Half-Cauchy C+(0, scale) on [0, inf).
inline double half_cauchy_logpdf(double x, double scale) {
  detail::require_positive(scale, "half_cauchy_logpdf scale");
  if (!std::isfinite(x) || x < 0.0) throw DomainError("half_cauchy_logpdf requires x >= 0");
  const double z = x / scale;
  return std::log(2.0 / std::numbers::pi) - std::log(scale) - std::log1p(z * z);
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace ebhb
