#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "ebhb/errors.hpp"
#include "ebhb/rng.hpp"

namespace ebhb {

namespace detail {

inline constexpr double kPgTrunc = 0.64;
inline constexpr int kPgGammaTerms = 200;

// exp(y^2) erfc(y) for y >= 0.
inline double erfcx(double y) {
  if (y < 25.0) return std::exp(y * y) * std::erfc(y);
  const double r = 1.0 / (y * y);
  return (1.0 - 0.5 * r + 0.75 * r * r) / (y * std::sqrt(std::numbers::pi));
}

inline double log_normal_cdf(double x) {
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  const double y = -x / std::numbers::sqrt2;
  return std::log(0.5 * erfcx(y)) - y * y;
}

// Coefficients a_n(x) of the alternating series for the J*(1, z) density.
inline double pg_series_coef(int n, double x) {
  const double k = (n + 0.5) * std::numbers::pi;
  if (x > kPgTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x <= 0.0) return 0.0;
  const double lg = -1.5 * (std::log(0.5 * std::numbers::pi) + std::log(x)) + std::log(k) -
                    2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(lg);
}

// Probability of the truncated-exponential branch of the proposal.
inline double pg_exponential_mass(double z) {
  const double t = kPgTrunc;
  const double fz = 0.125 * std::numbers::pi * std::numbers::pi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_normal_cdf(b);
  const double xa = x0 + z + log_normal_cdf(a);
  const double q_over_p = 4.0 / std::numbers::pi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// Inverse Gaussian IG(mu = 1/z, shape 1) truncated to (0, kPgTrunc).
inline double pg_truncated_inv_gauss(double z, RngStream& rng) {
  const double t = kPgTrunc;
  if (z == 0.0 || 1.0 / z > t) {
    for (;;) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      const double x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      if (rng.uniform() <= std::exp(-0.5 * z * z * x)) return x;
    }
  }
  const double mu = 1.0 / z;
  double x = t + 1.0;
  while (x > t) {
    const double n = rng.normal();
    const double y = n * n;
    x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

// Exact PG(1, c) by the alternating-series rejection sampler.
inline double polya_gamma_one(double c, RngStream& rng) {
  const double z = 0.5 * std::fabs(c);
  const double fz = 0.125 * std::numbers::pi * std::numbers::pi + 0.5 * z * z;
  const double p_exp = pg_exponential_mass(z);
  for (;;) {
    const double x = rng.uniform() < p_exp ? kPgTrunc + rng.exponential() / fz
                                           : pg_truncated_inv_gauss(z, rng);
    double s = pg_series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= pg_series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += pg_series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

// Truncated infinite-convolution representation
//   PG(b, c) = 1/(2 pi^2) sum_k g_k / ((k - 1/2)^2 + c^2/(4 pi^2)),  g_k ~ Gamma(b, 1),
// with the omitted tail replaced by its expectation.
inline double polya_gamma_gamma_sum(double b, double c, RngStream& rng) {
  const double d = c * c / (4.0 * std::numbers::pi * std::numbers::pi);
  double acc = 0.0;
  for (int k = 1; k <= kPgGammaTerms; ++k) {
    const double h = k - 0.5;
    acc += rng.gamma(b, 1.0) / (h * h + d);
  }
  const double m = static_cast<double>(kPgGammaTerms);
  const double tail = d > 0.0 ? (0.5 * std::numbers::pi - std::atan(m / std::sqrt(d))) / std::sqrt(d)
                              : 1.0 / m;
  acc += b * tail;
  return acc / (2.0 * std::numbers::pi * std::numbers::pi);
}

}  // namespace detail

/// Draw from the Polya-Gamma PG(b, c) law. Integer b sums b exact PG(1, c)
/// draws; fractional b uses a 200-term gamma-sum approximation.
inline double sample_polya_gamma(double b, double c, RngStream& rng) {
  detail::require_positive(b, "Polya-Gamma b");
  detail::require_finite(c, "Polya-Gamma c");
  const double rounded = std::round(b);
  if (std::fabs(b - rounded) < 1e-12 && rounded <= 1e7) {
    const auto count = static_cast<std::uint64_t>(rounded);
    double s = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) s += detail::polya_gamma_one(c, rng);
    return s;
  }
  return detail::polya_gamma_gamma_sum(b, c, rng);
}

/// E[PG(b, c)] = b / (2c) tanh(c / 2), and b / 4 at c = 0.
inline double polya_gamma_mean(double b, double c) {
  if (std::fabs(c) < 1e-8) return 0.25 * b * (1.0 - c * c / 12.0);
  return b / (2.0 * c) * std::tanh(0.5 * c);
}

}  // namespace ebhb
