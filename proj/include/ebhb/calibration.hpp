#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "ebhb/errors.hpp"
#include "ebhb/horseshoe.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/rng.hpp"

namespace ebhb {

struct StudyEstimate {
  double estimate = 0.0;
  double variance = 1.0;
};

/// One experimental estimate of the effect, observational estimates of effect
/// plus bias, and calibration estimates of bias alone (true effect zero).
struct StudySet {
  std::optional<StudyEstimate> experiment;
  std::vector<StudyEstimate> observational;
  std::vector<StudyEstimate> calibration;

  void validate() const {
    const auto check = [](const StudyEstimate& s) {
      detail::require_finite(s.estimate, "study estimate");
      detail::require_positive(s.variance, "study variance");
    };
    if (experiment) check(*experiment);
    for (const auto& s : observational) check(s);
    for (const auto& s : calibration) check(s);
    detail::require(experiment.has_value() || !observational.empty(),
                    "need an experimental or an observational study");
  }
};

/// Normal-inverse-gamma prior on the bias distribution:
/// gamma2 ~ IG(a0, b0), mu | gamma2 ~ N(mu0, gamma2 / k0).
struct BiasHyperPrior {
  double mu0 = 0.0;
  double k0 = 1.0;
  double a0 = 2.0;
  double b0 = 0.5;

  void validate() const {
    detail::require_finite(mu0, "mu0");
    detail::require_positive(k0, "k0");
    detail::require_positive(a0, "a0");
    detail::require_positive(b0, "b0");
  }
};

inline constexpr double kDefaultThetaPriorVar = 1e6;

struct CalibrationDraws {
  // Columns: theta, mu, gamma2, b[j] for observational studies, then
  // b_cal[k] for calibration studies when they are pooled.
  PosteriorDraws draws;
  // No observational and no calibration studies: theta is informed by the
  // experiment alone.
  bool experiment_only = false;
};

/// Gibbs sampler for the bias-calibration model with conjugate draws:
///   y_e ~ N(theta, v_e),  y_oj ~ N(theta + b_j, v_oj),  y_ck ~ N(b_ck, v_ck),
///   b ~ N(mu, gamma2),  (mu, gamma2) ~ NIG,  theta ~ N(0, theta_prior_var).
/// With pool_calibration off the calibration studies are left out and
/// (mu, gamma2) is informed by the observational biases only.
inline CalibrationDraws gibbs_calibration(const StudySet& studies, const BiasHyperPrior& hyper,
                                          double theta_prior_var, const HorseshoeConfig& config,
                                          bool pool_calibration = true) {
  studies.validate();
  hyper.validate();
  detail::require_positive(theta_prior_var, "theta_prior_var");
  config.validate();

  const std::size_t n_obs = studies.observational.size();
  const std::size_t n_cal = pool_calibration ? studies.calibration.size() : 0;
  const std::size_t m = n_obs + n_cal;

  std::vector<std::string> names{"theta", "mu", "gamma2"};
  for (std::size_t j = 0; j < n_obs; ++j) names.push_back("b[" + std::to_string(j + 1) + "]");
  for (std::size_t k = 0; k < n_cal; ++k) names.push_back("b_cal[" + std::to_string(k + 1) + "]");
  CalibrationDraws out;
  out.experiment_only = m == 0;
  out.draws = PosteriorDraws(std::move(names), config.burn_in, config.thin, config.seed);
  out.draws.reserve(config.retained());

  RngStream rng(config.seed, 0);
  std::vector<double> bias(m, 0.0), row(3 + m);
  double theta = studies.experiment ? studies.experiment->estimate : 0.0;
  double mu = hyper.mu0;
  double gamma2 = hyper.b0 / (hyper.a0 + 1.0);

  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    {
      double prec = 1.0 / theta_prior_var, num = 0.0;
      if (studies.experiment) {
        prec += 1.0 / studies.experiment->variance;
        num += studies.experiment->estimate / studies.experiment->variance;
      }
      for (std::size_t j = 0; j < n_obs; ++j) {
        const auto& s = studies.observational[j];
        prec += 1.0 / s.variance;
        num += (s.estimate - bias[j]) / s.variance;
      }
      theta = rng.normal(num / prec, std::sqrt(1.0 / prec));
    }
    for (std::size_t j = 0; j < m; ++j) {
      const bool obs = j < n_obs;
      const auto& s = obs ? studies.observational[j] : studies.calibration[j - n_obs];
      const double resid = obs ? s.estimate - theta : s.estimate;
      const double prec = 1.0 / s.variance + 1.0 / gamma2;
      bias[j] = rng.normal((resid / s.variance + mu / gamma2) / prec, std::sqrt(1.0 / prec));
    }
    {
      double mean = 0.0;
      for (double b : bias) mean += b;
      const double dm = static_cast<double>(m);
      if (m > 0) mean /= dm;
      double ss = 0.0;
      for (double b : bias) ss += (b - mean) * (b - mean);
      const double kn = hyper.k0 + dm;
      const double mun = (hyper.k0 * hyper.mu0 + dm * mean) / kn;
      const double an = hyper.a0 + 0.5 * dm;
      const double bn = hyper.b0 + 0.5 * ss + 0.5 * hyper.k0 * dm * (mean - hyper.mu0) * (mean - hyper.mu0) / kn;
      gamma2 = detail::clamp_scale(rng.inv_gamma(an, bn));
      mu = rng.normal(mun, std::sqrt(gamma2 / kn));
    }
    if (config.keep(iter)) {
      row[0] = theta;
      row[1] = mu;
      row[2] = gamma2;
      std::copy(bias.begin(), bias.end(), row.begin() + 3);
      out.draws.push_row(row);
    }
  }
  return out;
}

struct PluginPosterior {
  double theta_mean = 0.0;
  double theta_sd = 0.0;
  double mu_hat = 0.0;
  double gamma2_hat = 0.0;
  // gamma2_hat sits on the zero boundary.
  bool boundary = false;
};

namespace detail {

struct CalibrationProfile {
  const std::vector<StudyEstimate>& cal;

  double mu_hat(double g2) const {
    double num = 0.0, den = 0.0;
    for (const auto& s : cal) {
      const double w = 1.0 / (g2 + s.variance);
      num += w * s.estimate;
      den += w;
    }
    return num / den;
  }

  double loglik(double g2) const {
    const double mu = mu_hat(g2);
    double total = 0.0;
    for (const auto& s : cal) {
      const double v = g2 + s.variance;
      total -= 0.5 * (std::log(v) + (s.estimate - mu) * (s.estimate - mu) / v);
    }
    return total;
  }

  // Derivative of the profile log-likelihood in gamma2.
  double slope(double g2) const {
    const double mu = mu_hat(g2);
    double total = 0.0;
    for (const auto& s : cal) {
      const double w = 1.0 / (g2 + s.variance);
      total += 0.5 * (w * w * (s.estimate - mu) * (s.estimate - mu) - w);
    }
    return total;
  }
};

}  // namespace detail

/// Marginal maximum likelihood for (mu, gamma2) from the calibration studies:
/// maximize prod_k N(y_ck; mu, gamma2 + v_ck) with mu profiled out.
inline PluginPosterior fit_bias_mml(const std::vector<StudyEstimate>& calibration) {
  detail::require(calibration.size() >= 2, "marginal ML for the bias needs at least 2 calibration studies");
  const detail::CalibrationProfile prof{calibration};
  double spread = 0.0, vmax = 0.0;
  for (const auto& s : calibration) {
    for (const auto& t : calibration) spread = std::max(spread, std::fabs(s.estimate - t.estimate));
    vmax = std::max(vmax, s.variance);
  }
  // Stationary points lie below the squared range of the estimates.
  const double upper = std::max(2.0 * spread * spread, 1e-12 * vmax);

  PluginPosterior best;
  best.gamma2_hat = 0.0;
  best.boundary = true;
  double best_ll = prof.loglik(0.0);
  const std::size_t steps = 400;
  double a = 0.0, fa = prof.slope(0.0);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double b = upper * std::pow(1e-12, 1.0 - static_cast<double>(i) / steps);
    const double fb = prof.slope(b);
    if (fa > 0.0 && fb <= 0.0) {
      boost::uintmax_t iters = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(
          [&](double g) { return prof.slope(g); }, a, b, fa, fb,
          boost::math::tools::eps_tolerance<double>(52), iters);
      const double root = 0.5 * (lo + hi);
      const double ll = prof.loglik(root);
      if (ll > best_ll) {
        best_ll = ll;
        best.gamma2_hat = root;
        best.boundary = false;
      }
    }
    a = b;
    fa = fb;
  }
  best.mu_hat = prof.mu_hat(best.gamma2_hat);
  return best;
}

/// Empirical-Bayes plug-in: (mu, gamma2) fixed at their marginal ML values
/// from the calibration studies, then the exact Gaussian posterior of theta
/// with the observational biases integrated out.
inline PluginPosterior eb_plugin_calibration(const StudySet& studies,
                                             double theta_prior_var = kDefaultThetaPriorVar) {
  studies.validate();
  detail::require_positive(theta_prior_var, "theta_prior_var");
  PluginPosterior out = fit_bias_mml(studies.calibration);
  double prec = 1.0 / theta_prior_var, num = 0.0;
  if (studies.experiment) {
    prec += 1.0 / studies.experiment->variance;
    num += studies.experiment->estimate / studies.experiment->variance;
  }
  for (const auto& s : studies.observational) {
    const double v = s.variance + out.gamma2_hat;
    prec += 1.0 / v;
    num += (s.estimate - out.mu_hat) / v;
  }
  out.theta_mean = num / prec;
  out.theta_sd = std::sqrt(1.0 / prec);
  return out;
}

/// Location-horseshoe bias model: b = mu + delta, delta_j ~ N(0, lambda_j^2
/// tau^2) with half-Cauchy scales, mu ~ N(0, 1e6), theta ~ N(0,
/// theta_prior_var). Studies are indexed observational first, then
/// calibration: columns theta, mu, delta[i], lambda[i], tau.
inline CalibrationDraws gibbs_calibration_horseshoe(const StudySet& studies, const HorseshoeConfig& config,
                                                    double theta_prior_var = kDefaultThetaPriorVar) {
  studies.validate();
  config.validate();
  detail::require_positive(theta_prior_var, "theta_prior_var");
  constexpr double kMuPriorVar = 1e6;

  const std::size_t n_obs = studies.observational.size();
  const std::size_t m = n_obs + studies.calibration.size();
  const auto study = [&](std::size_t j) -> const StudyEstimate& {
    return j < n_obs ? studies.observational[j] : studies.calibration[j - n_obs];
  };

  std::vector<std::string> names{"theta", "mu"};
  for (std::size_t j = 0; j < m; ++j) names.push_back("delta[" + std::to_string(j + 1) + "]");
  for (std::size_t j = 0; j < m; ++j) names.push_back("lambda[" + std::to_string(j + 1) + "]");
  names.emplace_back("tau");
  CalibrationDraws out;
  out.experiment_only = m == 0;
  out.draws = PosteriorDraws(std::move(names), config.burn_in, config.thin, config.seed);
  out.draws.reserve(config.retained());

  RngStream rng(config.seed, 0);
  std::vector<double> delta(m, 0.0), lambda2(m, 1.0), nu(m, 1.0), row(3 + 2 * m);
  double theta = studies.experiment ? studies.experiment->estimate : 0.0;
  double mu = 0.0;
  double tau2 = config.tau_fixed ? (*config.tau_fixed) * (*config.tau_fixed) : 1.0;
  double xi = 1.0;

  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    {
      double prec = 1.0 / theta_prior_var, num = 0.0;
      if (studies.experiment) {
        prec += 1.0 / studies.experiment->variance;
        num += studies.experiment->estimate / studies.experiment->variance;
      }
      for (std::size_t j = 0; j < n_obs; ++j) {
        const auto& s = studies.observational[j];
        prec += 1.0 / s.variance;
        num += (s.estimate - mu - delta[j]) / s.variance;
      }
      theta = rng.normal(num / prec, std::sqrt(1.0 / prec));
    }
    {
      double prec = 1.0 / kMuPriorVar, num = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const auto& s = study(j);
        const double shift = j < n_obs ? theta : 0.0;
        prec += 1.0 / s.variance;
        num += (s.estimate - shift - delta[j]) / s.variance;
      }
      mu = rng.normal(num / prec, std::sqrt(1.0 / prec));
    }
    double ssq_half = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& s = study(j);
      const double resid = s.estimate - mu - (j < n_obs ? theta : 0.0);
      const double prec = 1.0 / s.variance + 1.0 / (lambda2[j] * tau2);
      delta[j] = rng.normal(resid / s.variance / prec, std::sqrt(1.0 / prec));
      lambda2[j] = detail::clamp_scale(rng.inv_gamma(1.0, 1.0 / nu[j] + delta[j] * delta[j] / (2.0 * tau2)));
      nu[j] = rng.inv_gamma(1.0, 1.0 + 1.0 / lambda2[j]);
      ssq_half += delta[j] * delta[j] / (2.0 * lambda2[j]);
    }
    if (!config.tau_fixed && m > 0) detail::update_global_scale(rng, config.tau_sampler, m, ssq_half, tau2, xi);

    if (config.keep(iter)) {
      row[0] = theta;
      row[1] = mu;
      for (std::size_t j = 0; j < m; ++j) {
        row[2 + j] = delta[j];
        row[2 + m + j] = std::sqrt(lambda2[j]);
      }
      row.back() = std::sqrt(tau2);
      out.draws.push_row(row);
    }
  }
  return out;
}

/// Study set drawn from the bias model with true effect theta: one
/// experiment (when var_exp > 0), n_obs observational and n_cal calibration
/// studies, biases N(mu, gamma^2).
inline StudySet simulate_study_set(double theta, double mu, double gamma, double var_exp, std::size_t n_obs,
                                   double var_obs, std::size_t n_cal, double var_cal, RngStream& rng) {
  StudySet set;
  if (var_exp > 0.0) set.experiment = StudyEstimate{rng.normal(theta, std::sqrt(var_exp)), var_exp};
  for (std::size_t j = 0; j < n_obs; ++j) {
    const double b = rng.normal(mu, gamma);
    set.observational.push_back({rng.normal(theta + b, std::sqrt(var_obs)), var_obs});
  }
  for (std::size_t k = 0; k < n_cal; ++k) {
    const double b = rng.normal(mu, gamma);
    set.calibration.push_back({rng.normal(b, std::sqrt(var_cal)), var_cal});
  }
  set.validate();
  return set;
}

}  // namespace ebhb
