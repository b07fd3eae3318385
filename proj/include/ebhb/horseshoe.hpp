#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "ebhb/errors.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/rng.hpp"

namespace ebhb {

enum class TauSampler { AuxiliaryVariable, Slice };

struct HorseshoeConfig {
  std::size_t n_iter = 20000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  // When set, the global scale is held at this value instead of sampled.
  std::optional<double> tau_fixed;
  TauSampler tau_sampler = TauSampler::AuxiliaryVariable;

  void validate() const {
    detail::require(n_iter >= 1, "n_iter must be positive");
    detail::require(burn_in < n_iter, "burn_in must be smaller than n_iter");
    detail::require(thin >= 1, "thin must be positive");
    if (tau_fixed) detail::require_positive(*tau_fixed, "tau_fixed");
  }

  std::size_t retained() const { return (n_iter - burn_in) / thin; }

  bool keep(std::size_t iter) const {
    return iter >= burn_in && (iter - burn_in + 1) % thin == 0;
  }
};

namespace detail {

// Integrals of the kappa posterior kernel under the horseshoe with fixed tau:
//   h(k) = exp(-k z) (1 - k)^(-1/2) / (1 + (s - 1) k),  z = x^2 / (2 sigma^2),
//   s = tau^2 / sigma^2,
// over k in (0, 1). i0 = int h, i1 = int k h. On [1/2, 1) the substitution
// 1 - k = u^2 removes the endpoint singularity.
struct KappaIntegrals {
  double i0 = 0.0;
  double i1 = 0.0;
  double error = 0.0;
};

inline KappaIntegrals kappa_integrals(double z, double s) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr unsigned kMaxDepth = 15;
  constexpr double kRelTol = 1e-11;

  KappaIntegrals out;
  // The Kronrod error estimate depends on the interval length and the size
  // of the integrand, so each piece is mapped onto [0, 1] and divided by its
  // largest sampled value before integrating.
  auto accumulate = [&](auto f0, auto f1, double a, double b) {
    const double len = b - a;
    const double peak = std::max({f0(a), f0(0.5 * (a + b)), f0(b), 1e-300});
    const double scale = std::isfinite(peak) ? 1.0 / peak : 1.0;
    double e0 = 0.0, e1 = 0.0;
    out.i0 += gauss_kronrod<double, 21>::integrate([&](double t) { return scale * f0(a + len * t); }, 0.0, 1.0,
                                                   kMaxDepth, kRelTol, &e0) * len / scale;
    out.i1 += gauss_kronrod<double, 21>::integrate([&](double t) { return scale * f1(a + len * t); }, 0.0, 1.0,
                                                   kMaxDepth, kRelTol, &e1) * len / scale;
    out.error += (e0 + e1) * len / scale;
  };

  auto h0 = [&](double k) { return std::exp(-k * z) / (std::sqrt(1.0 - k) * (1.0 + (s - 1.0) * k)); };
  auto h1 = [&](double k) { return k * h0(k); };
  // Breakpoints where exp(-k z) has decayed by a fixed factor, so large |x|
  // (mass piled up near k = 0) is resolved.
  std::vector<double> br{0.0};
  for (double c : {0.25, 1.0, 4.0, 16.0, 64.0})
    if (z > 0.0 && c / z < 0.5) br.push_back(c / z);
  br.push_back(0.5);
  for (std::size_t i = 0; i + 1 < br.size(); ++i) accumulate(h0, h1, br[i], br[i + 1]);

  auto g0 = [&](double u) {
    const double k = 1.0 - u * u;
    return 2.0 * std::exp(-k * z) / (s + (1.0 - s) * u * u);
  };
  auto g1 = [&](double u) { return (1.0 - u * u) * g0(u); };
  // Near k = 1 the kernel is a Lorentzian in u of width sqrt(s).
  std::vector<double> bu{0.0};
  for (double c : {0.5, 2.0, 8.0, 32.0})
    if (c * std::sqrt(s) < 0.5) bu.push_back(c * std::sqrt(s));
  bu.push_back(std::numbers::sqrt2 / 2.0);
  for (std::size_t i = 0; i + 1 < bu.size(); ++i) accumulate(g0, g1, bu[i], bu[i + 1]);
  return out;
}

}  // namespace detail

/// E[kappa | x] for kappa = 1 / (1 + lambda^2 tau^2 / sigma^2), lambda ~ C+(0,1),
/// tau fixed. Adaptive Gauss-Kronrod quadrature, absolute accuracy 1e-10.
/// For |x| / sigma beyond 1e100 the asymptote 2 sigma^2 / x^2 is returned.
inline double kappa_posterior_mean(double x, double sigma, double tau) {
  detail::require_finite(x, "x");
  detail::require_positive(sigma, "sigma");
  detail::require_positive(tau, "tau");
  const double r = x / sigma;
  const double z = 0.5 * r * r;
  if (std::fabs(r) > 1e100) return 1.0 / z;
  const double s = (tau / sigma) * (tau / sigma);
  const detail::KappaIntegrals q = detail::kappa_integrals(z, s);
  const double mean = q.i1 / q.i0;
  const double err = q.error / q.i0 * (1.0 + mean);
  if (!std::isfinite(mean) || !(mean > 0.0 && mean < 1.0) || err > 1e-10) {
    std::ostringstream msg;
    msg << "kappa quadrature did not converge: x=" << x << " sigma=" << sigma << " tau=" << tau
        << " estimate=" << mean << " error=" << err;
    throw NumericError(msg.str());
  }
  return mean;
}

/// Horseshoe posterior mean (1 - E[kappa | x]) x with tau fixed. The rule is
/// odd: it is computed at |x| and reflected.
inline ShrinkageRule horseshoe_tweedie_rule(double sigma, double tau, const std::vector<double>& grid) {
  require_increasing_grid(grid);
  ShrinkageRule rule;
  rule.method_tag = MethodTag::Horseshoe;
  rule.grid = grid;
  rule.values.reserve(grid.size());
  for (double x : grid) {
    const double ax = std::fabs(x);
    const double v = (1.0 - kappa_posterior_mean(ax, sigma, tau)) * ax;
    rule.values.push_back(x < 0.0 ? -v : v);
  }
  rule.validate();
  return rule;
}

/// log m(x | tau) for the horseshoe normal-means marginal.
inline double horseshoe_marginal_logpdf(double x, double sigma, double tau) {
  detail::require_finite(x, "x");
  detail::require_positive(sigma, "sigma");
  detail::require_positive(tau, "tau");
  const double r = x / sigma;
  const double s = (tau / sigma) * (tau / sigma);
  const detail::KappaIntegrals q = detail::kappa_integrals(0.5 * r * r, s);
  // m(x) = sqrt(s) / (pi sigma sqrt(2 pi)) * int h(k) dk
  return 0.5 * std::log(s) - std::log(std::numbers::pi * sigma) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(q.i0);
}

inline double horseshoe_marginal_loglik(const NormalMeansData& data, double tau) {
  data.validate();
  double total = 0.0;
  for (double x : data.x) total += horseshoe_marginal_logpdf(x, data.sigma, tau);
  return total;
}

/// Type-II ML estimate of the global scale, restricted to [1/n, 1].
inline double fit_tau_mml(const NormalMeansData& data) {
  data.validate();
  const double lo = std::log(1.0 / static_cast<double>(std::max<std::size_t>(data.x.size(), 2)));
  const double hi = 0.0;
  auto neg = [&](double log_tau) { return -horseshoe_marginal_loglik(data, std::exp(log_tau)); };
  auto [arg, val] = boost::math::tools::brent_find_minima(neg, lo, hi, 30);
  for (double end : {lo, hi}) {
    const double v = neg(end);
    if (v < val) {
      val = v;
      arg = end;
    }
  }
  return std::exp(arg);
}

namespace detail {

// Draw eta ~ Gamma(shape, rate) truncated to (0, upper) by inversion.
inline double truncated_gamma(RngStream& rng, double shape, double rate, double upper) {
  const double pmax = boost::math::gamma_p(shape, rate * upper);
  const double u = rng.uniform();
  if (pmax <= 1e-300) return upper * std::pow(u, 1.0 / shape);
  const double p = std::min(u * pmax, pmax);
  return boost::math::gamma_p_inv(shape, p) / rate;
}

inline double clamp_scale(double v) { return std::clamp(v, 1e-100, 1e100); }

// Global-scale update shared by the samplers: given sum_j theta_j^2/(2 lambda_j^2)
// over `count` coefficients, refresh tau^2 (and its auxiliary xi).
inline void update_global_scale(RngStream& rng, TauSampler sampler, std::size_t count,
                                double ssq_half, double& tau2, double& xi) {
  const double shape = 0.5 * (static_cast<double>(count) + 1.0);
  if (sampler == TauSampler::AuxiliaryVariable) {
    tau2 = clamp_scale(rng.inv_gamma(shape, 1.0 / xi + ssq_half));
    xi = rng.inv_gamma(1.0, 1.0 + 1.0 / tau2);
  } else {
    // Slice on eta = 1/tau^2 whose conditional is Gamma(shape, ssq_half) / (1 + eta).
    const double eta = 1.0 / tau2;
    const double u = rng.uniform() / (1.0 + eta);
    const double upper = (1.0 - u) / u;
    const double rate = std::max(ssq_half, 1e-300);
    tau2 = clamp_scale(1.0 / truncated_gamma(rng, shape, rate, upper));
  }
}

}  // namespace detail

/// Horseshoe Gibbs sampler for the normal-means problem. Half-Cauchy scales
/// use the inverse-gamma auxiliary decomposition
///   lambda^2 | nu ~ IG(1/2, 1/nu),  nu ~ IG(1/2, 1),
/// so every conditional is closed form. Draws are named theta[i], lambda[i]
/// (1-based) and tau.
inline PosteriorDraws gibbs_horseshoe(const NormalMeansData& data, const HorseshoeConfig& config) {
  data.validate(1);
  config.validate();
  const std::size_t n = data.x.size();
  const double s2 = data.sigma * data.sigma;

  std::vector<std::string> names;
  names.reserve(2 * n + 1);
  for (std::size_t i = 0; i < n; ++i) names.push_back("theta[" + std::to_string(i + 1) + "]");
  for (std::size_t i = 0; i < n; ++i) names.push_back("lambda[" + std::to_string(i + 1) + "]");
  names.emplace_back("tau");
  PosteriorDraws draws(std::move(names), config.burn_in, config.thin, config.seed);
  draws.reserve(config.retained());

  RngStream rng(config.seed, 0);
  std::vector<double> theta(data.x), lambda2(n, 1.0), nu(n, 1.0), row(2 * n + 1);
  double tau2 = config.tau_fixed ? (*config.tau_fixed) * (*config.tau_fixed) : 1.0;
  double xi = 1.0;

  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prior_var = lambda2[i] * tau2;
      const double v = 1.0 / (1.0 / s2 + 1.0 / prior_var);
      theta[i] = rng.normal(v * data.x[i] / s2, std::sqrt(v));
    }
    double ssq_half = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lambda2[i] = detail::clamp_scale(
          rng.inv_gamma(1.0, 1.0 / nu[i] + theta[i] * theta[i] / (2.0 * tau2)));
      nu[i] = rng.inv_gamma(1.0, 1.0 + 1.0 / lambda2[i]);
      ssq_half += theta[i] * theta[i] / (2.0 * lambda2[i]);
    }
    if (!config.tau_fixed)
      detail::update_global_scale(rng, config.tau_sampler, n, ssq_half, tau2, xi);

    if (config.keep(iter)) {
      for (std::size_t i = 0; i < n; ++i) {
        row[i] = theta[i];
        row[n + i] = std::sqrt(lambda2[i]);
      }
      row[2 * n] = std::sqrt(tau2);
      draws.push_row(row);
    }
  }
  return draws;
}

}  // namespace ebhb
