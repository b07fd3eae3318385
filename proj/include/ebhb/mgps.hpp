#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "ebhb/dist.hpp"
#include "ebhb/errors.hpp"
#include "ebhb/horseshoe.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/optim.hpp"
#include "ebhb/polya_gamma.hpp"
#include "ebhb/rng.hpp"

namespace ebhb {

struct DrugEventCell {
  std::string drug;
  std::string event;
  std::uint64_t n = 0;
  double e = 1.0;
};

/// Observed report counts n and expected counts e per (drug, event) pair.
struct DrugEventTable {
  std::vector<DrugEventCell> cells;

  std::size_t size() const { return cells.size(); }

  void validate() const {
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    for (const auto& c : cells) {
      detail::require_positive(c.e, "expected count e");
      if (!seen.emplace(std::make_pair(c.drug, c.event), 0).second)
        throw DomainError("duplicate (drug, event) pair: " + c.drug + ", " + c.event);
    }
  }
};

/// Two-component gamma mixture prior on the relative reporting rate.
struct MgpsParams {
  double w = 0.5;
  GammaParams comp1;
  GammaParams comp2;

  // w = 1 (single component) is accepted when allow_single is set.
  void validate(bool allow_single = false) const {
    comp1.validate();
    comp2.validate();
    if (allow_single) {
      detail::require(w > 0.0 && w <= 1.0, "mixing weight must lie in (0, 1]");
    } else {
      detail::require(w > 0.0 && w < 1.0, "mixing weight must lie in (0, 1)");
    }
  }

  /// Component with the smaller prior mean first.
  MgpsParams canonical() const {
    if (comp1.mean() <= comp2.mean()) return *this;
    return MgpsParams{1.0 - w, comp2, comp1};
  }

  /// Starting values commonly used for spontaneous-report tables.
  static MgpsParams default_init() { return MgpsParams{0.5, {0.2, 0.1}, {2.0, 4.0}}; }
};

struct CellPosterior {
  double weight1 = 1.0;
  GammaParams post1;
  GammaParams post2;
};

namespace detail {

// log NB(n; a, b/(b+e)): the gamma-Poisson marginal of a count with exposure e.
inline double gamma_poisson_logpmf(std::uint64_t n, double a, double b, double e) {
  const double dn = static_cast<double>(n);
  const double log_be = std::log(b + e);
  double out = a * (std::log(b) - log_be);
  if (n > 0)
    out += std::lgamma(dn + a) - std::lgamma(a) - std::lgamma(dn + 1.0) + dn * (std::log(e) - log_be);
  return out;
}

inline double mgps_cell_loglik(const MgpsParams& p, std::uint64_t n, double e) {
  const double l1 = gamma_poisson_logpmf(n, p.comp1.shape, p.comp1.rate, e);
  if (p.w >= 1.0) return std::log(p.w) + l1;
  const double l2 = gamma_poisson_logpmf(n, p.comp2.shape, p.comp2.rate, e);
  return log_add_exp(std::log(p.w) + l1, std::log1p(-p.w) + l2);
}

}  // namespace detail

/// Sum over cells of log[w NB(n; a1, b1/(b1+e)) + (1-w) NB(n; a2, b2/(b2+e))].
inline double marginal_loglik_mgps(const MgpsParams& params, const DrugEventTable& table) {
  params.validate(true);
  double total = 0.0;
  for (const auto& c : table.cells) {
    detail::require_positive(c.e, "expected count e");
    total += detail::mgps_cell_loglik(params, c.n, c.e);
  }
  return total;
}

inline CellPosterior cell_posterior(std::uint64_t n, double e, const MgpsParams& params) {
  params.validate(true);
  detail::require_positive(e, "expected count e");
  const double dn = static_cast<double>(n);
  CellPosterior cp;
  cp.post1 = {params.comp1.shape + dn, params.comp1.rate + e};
  cp.post2 = {params.comp2.shape + dn, params.comp2.rate + e};
  if (params.w >= 1.0) {
    cp.weight1 = 1.0;
  } else {
    const double l1 = std::log(params.w) + detail::gamma_poisson_logpmf(n, params.comp1.shape, params.comp1.rate, e);
    const double l2 = std::log1p(-params.w) + detail::gamma_poisson_logpmf(n, params.comp2.shape, params.comp2.rate, e);
    cp.weight1 = 1.0 / (1.0 + std::exp(l2 - l1));
  }
  return cp;
}

/// exp E[log lambda | n, e] under the posterior gamma mixture.
inline double ebgm(const CellPosterior& cp) {
  const double g1 = digamma(cp.post1.shape) - std::log(cp.post1.rate);
  if (cp.weight1 >= 1.0) return std::exp(g1);
  const double g2 = digamma(cp.post2.shape) - std::log(cp.post2.rate);
  return std::exp(cp.weight1 * g1 + (1.0 - cp.weight1) * g2);
}

inline double ebgm(std::uint64_t n, double e, const MgpsParams& params) {
  return ebgm(cell_posterior(n, e, params));
}

/// Quantile of the posterior gamma mixture, by bisection on its CDF.
inline double posterior_quantile(const CellPosterior& cp, double prob) {
  detail::require(prob > 0.0 && prob < 1.0, "quantile level must lie in (0, 1)");
  const auto cdf = [&](double lam) {
    double c = cp.weight1 * boost::math::gamma_p(cp.post1.shape, cp.post1.rate * lam);
    if (cp.weight1 < 1.0) c += (1.0 - cp.weight1) * boost::math::gamma_p(cp.post2.shape, cp.post2.rate * lam);
    return c;
  };
  const double q1 = boost::math::gamma_p_inv(cp.post1.shape, prob) / cp.post1.rate;
  const double q2 = boost::math::gamma_p_inv(cp.post2.shape, prob) / cp.post2.rate;
  double lo = std::min(q1, q2), hi = std::max(q1, q2);
  if (cp.weight1 >= 1.0) return q1;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Lower 5% posterior quantile of the reporting rate.
inline double eb05(std::uint64_t n, double e, const MgpsParams& params) {
  return posterior_quantile(cell_posterior(n, e, params), 0.05);
}

struct MgpsFit {
  MgpsParams params;
  double loglik = 0.0;
  double init_loglik = 0.0;
  bool converged = false;
  // Mixing weight at the boundary or a scale parameter run off to 0 or infinity.
  bool degenerate = false;
  std::size_t evaluations = 0;
  // Best log-likelihood found, after each simplex update; nondecreasing.
  std::vector<double> trace;
};

namespace detail {

inline std::vector<double> mgps_pack(const MgpsParams& p) {
  return {std::log(p.comp1.shape), std::log(p.comp1.rate), std::log(p.comp2.shape),
          std::log(p.comp2.rate), std::log(p.w) - std::log1p(-p.w)};
}

inline MgpsParams mgps_unpack(const std::vector<double>& x) {
  return MgpsParams{1.0 / (1.0 + std::exp(-x[4])),
                    {std::exp(x[0]), std::exp(x[1])},
                    {std::exp(x[2]), std::exp(x[3])}};
}

}  // namespace detail

/// Type-II maximum likelihood for the mixture prior by Nelder-Mead over
/// (log shapes, log rates, logit w). Restarts from the best point until a
/// restart no longer improves it. Converged means the simplex diameter fell
/// below tol.
inline MgpsFit fit_type2_ml(const DrugEventTable& table, const MgpsParams& init = MgpsParams::default_init(),
                            double tol = 1e-6, std::size_t max_evals = 20000) {
  table.validate();
  init.validate();
  detail::require_positive(tol, "tol");
  detail::require(table.size() >= 1, "fit_type2_ml: empty table");

  // Cells sharing (n, e) contribute identical terms.
  std::map<std::pair<std::uint64_t, double>, double> groups;
  for (const auto& c : table.cells) groups[{c.n, c.e}] += 1.0;
  const auto loglik = [&](const MgpsParams& p) {
    double total = 0.0;
    for (const auto& [key, count] : groups) total += count * detail::mgps_cell_loglik(p, key.first, key.second);
    return total;
  };
  const auto objective = [&](const std::vector<double>& x) {
    const MgpsParams p = detail::mgps_unpack(x);
    if (!(p.w > 0.0 && p.w < 1.0) || !(p.comp1.shape > 0.0) || !(p.comp1.rate > 0.0) ||
        !(p.comp2.shape > 0.0) || !(p.comp2.rate > 0.0) || !std::isfinite(p.comp1.shape * p.comp1.rate * p.comp2.shape * p.comp2.rate))
      return std::numeric_limits<double>::infinity();
    return -loglik(p);
  };

  MgpsFit fit;
  fit.init_loglik = loglik(init);
  std::vector<double> x = detail::mgps_pack(init);
  double best = -fit.init_loglik;
  fit.trace.push_back(fit.init_loglik);
  NelderMeadOptions opts;
  opts.xtol = tol;
  for (int round = 0; round < 5 && fit.evaluations < max_evals; ++round) {
    opts.max_evals = max_evals - fit.evaluations;
    const NelderMeadResult res = nelder_mead(objective, x, opts);
    fit.evaluations += res.evaluations;
    for (double v : res.best_trace) fit.trace.push_back(std::max(fit.trace.back(), -v));
    fit.converged = res.converged;
    const bool improved = res.value < best - 1e-9 * (1.0 + std::fabs(best));
    if (res.value < best) {
      best = res.value;
      x = res.x;
    }
    if (!improved && res.converged) break;
    opts.initial_step = 0.25;
  }

  fit.params = detail::mgps_unpack(x).canonical();
  fit.loglik = -best;
  const auto extreme = [](double v) { return std::fabs(std::log(v)) > 15.0; };
  fit.degenerate = fit.params.w < 1e-4 || fit.params.w > 1.0 - 1e-4 || extreme(fit.params.comp1.shape) ||
                   extreme(fit.params.comp1.rate) || extreme(fit.params.comp2.shape) ||
                   extreme(fit.params.comp2.rate);
  return fit;
}

struct MgpsCellResult {
  DrugEventCell cell;
  double ebgm = 0.0;
  double eb05 = 0.0;
  double weight1 = 1.0;
};

inline std::vector<MgpsCellResult> score_table(const DrugEventTable& table, const MgpsParams& params) {
  std::vector<MgpsCellResult> out;
  out.reserve(table.size());
  for (const auto& c : table.cells) {
    const CellPosterior cp = cell_posterior(c.n, c.e, params);
    out.push_back({c, ebgm(cp), posterior_quantile(cp, 0.05), cp.weight1});
  }
  return out;
}

/// Table with lambda drawn from the mixture prior and n ~ Poisson(lambda e),
/// e drawn log-uniformly on [e_lo, e_hi].
inline DrugEventTable simulate_drug_event_table(const MgpsParams& params, std::size_t cells, double e_lo,
                                                double e_hi, RngStream& rng) {
  params.validate(true);
  detail::require_positive(e_lo, "e_lo");
  detail::require(e_hi >= e_lo, "e_hi must be at least e_lo");
  DrugEventTable table;
  table.cells.reserve(cells);
  const std::size_t width = std::to_string(cells).size();
  for (std::size_t i = 0; i < cells; ++i) {
    const double e = e_lo * std::exp(rng.uniform() * std::log(e_hi / e_lo));
    const GammaParams& g = rng.uniform() < params.w ? params.comp1 : params.comp2;
    const double lambda = rng.gamma(g.shape, g.rate);
    std::string id = std::to_string(i);
    id.insert(0, width - id.size(), '0');
    table.cells.push_back({"D" + id, "E" + id, rng.poisson(lambda * e), e});
  }
  return table;
}

struct PgRegressionResult {
  // Columns: intercept, beta[j], lambda[j] (j = 1..p), tau.
  PosteriorDraws draws;
  bool rank_deficient = false;
};

/// Negative-binomial regression of the counts with log-odds
///   psi = intercept + X beta + log e - log r
/// by Polya-Gamma augmentation. The intercept has a N(0, 1e6) prior and the
/// columns of X a horseshoe prior. Given the PG variables the coefficient
/// update is an exact Gaussian draw.
inline PgRegressionResult pg_covariate_gibbs(const DrugEventTable& table, const Eigen::MatrixXd& covariates,
                                             double r, const HorseshoeConfig& config) {
  table.validate();
  config.validate();
  detail::require_positive(r, "r");
  const auto n = static_cast<Eigen::Index>(table.size());
  detail::require(n >= 1, "pg_covariate_gibbs: empty table");
  detail::require(covariates.rows() == n, "design matrix must have one row per cell");
  detail::require(covariates.allFinite(), "design matrix must be finite");
  const Eigen::Index p = covariates.cols();
  const Eigen::Index dim = p + 1;

  Eigen::MatrixXd design(n, dim);
  design.col(0).setOnes();
  design.rightCols(p) = covariates;

  PgRegressionResult result;
  if (p > 0) {
    Eigen::MatrixXd centered = covariates.rowwise() - covariates.colwise().mean();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
    qr.setThreshold(1e-10);
    result.rank_deficient = qr.rank() < p;
  }
  const double jitter = result.rank_deficient ? 1e-8 : 0.0;

  Eigen::VectorXd offset(n), kappa(n);
  std::vector<double> counts(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = table.cells[static_cast<std::size_t>(i)];
    offset[i] = std::log(c.e) - std::log(r);
    counts[static_cast<std::size_t>(i)] = static_cast<double>(c.n);
    kappa[i] = 0.5 * (static_cast<double>(c.n) - r);
  }

  std::vector<std::string> names{"intercept"};
  for (Eigen::Index j = 1; j <= p; ++j) names.push_back("beta[" + std::to_string(j) + "]");
  for (Eigen::Index j = 1; j <= p; ++j) names.push_back("lambda[" + std::to_string(j) + "]");
  names.emplace_back("tau");
  result.draws = PosteriorDraws(std::move(names), config.burn_in, config.thin, config.seed);
  result.draws.reserve(config.retained());

  RngStream rng(config.seed, 0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim), omega(n), z(dim);
  std::vector<double> lambda2(static_cast<std::size_t>(p), 1.0), nu(static_cast<std::size_t>(p), 1.0);
  double tau2 = config.tau_fixed ? (*config.tau_fixed) * (*config.tau_fixed) : 1.0;
  double xi = 1.0;
  std::vector<double> row(static_cast<std::size_t>(2 * p + 2));
  constexpr double kInterceptPriorVar = 1e6;

  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    const Eigen::VectorXd psi = design * beta + offset;
    for (Eigen::Index i = 0; i < n; ++i)
      omega[i] = sample_polya_gamma(counts[static_cast<std::size_t>(i)] + r, psi[i], rng);

    Eigen::MatrixXd precision = design.transpose() * omega.asDiagonal() * design;
    precision(0, 0) += 1.0 / kInterceptPriorVar;
    for (Eigen::Index j = 0; j < p; ++j)
      precision(j + 1, j + 1) += 1.0 / (lambda2[static_cast<std::size_t>(j)] * tau2);
    precision.diagonal().array() += jitter;
    const Eigen::VectorXd rhs = design.transpose() * (kappa - omega.cwiseProduct(offset));
    const Eigen::LLT<Eigen::MatrixXd> chol(precision);
    if (chol.info() != Eigen::Success) throw NumericError("pg_covariate_gibbs: precision not positive definite");
    const Eigen::VectorXd mean = chol.solve(rhs);
    for (Eigen::Index j = 0; j < dim; ++j) z[j] = rng.normal();
    beta = mean + chol.matrixU().solve(z);

    double ssq_half = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto k = static_cast<std::size_t>(j);
      const double b = beta[j + 1];
      lambda2[k] = detail::clamp_scale(rng.inv_gamma(1.0, 1.0 / nu[k] + b * b / (2.0 * tau2)));
      nu[k] = rng.inv_gamma(1.0, 1.0 + 1.0 / lambda2[k]);
      ssq_half += b * b / (2.0 * lambda2[k]);
    }
    if (!config.tau_fixed && p > 0)
      detail::update_global_scale(rng, config.tau_sampler, static_cast<std::size_t>(p), ssq_half, tau2, xi);

    if (config.keep(iter)) {
      for (Eigen::Index j = 0; j < dim; ++j) row[static_cast<std::size_t>(j)] = beta[j];
      for (Eigen::Index j = 0; j < p; ++j)
        row[static_cast<std::size_t>(dim + j)] = std::sqrt(lambda2[static_cast<std::size_t>(j)]);
      row.back() = std::sqrt(tau2);
      result.draws.push_row(row);
    }
  }
  return result;
}

}  // namespace ebhb
