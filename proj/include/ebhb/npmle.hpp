#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ebhb/dist.hpp"
#include "ebhb/errors.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/optim.hpp"
#include "ebhb/tweedie_f.hpp"

namespace ebhb {

/// Discrete mixing distribution: atoms with nonnegative weights summing to 1.
struct DiscretePrior {
  std::vector<double> atoms;
  std::vector<double> weights;

  void validate() const {
    detail::require(!atoms.empty(), "prior needs at least one atom");
    detail::require(atoms.size() == weights.size(), "atoms and weights differ in length");
    double total = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      detail::require_finite(atoms[k], "atom");
      detail::require(weights[k] >= 0.0 && std::isfinite(weights[k]), "weights must be >= 0");
      if (k > 0) detail::require(atoms[k] > atoms[k - 1], "atoms must be strictly increasing");
      total += weights[k];
    }
    detail::require(std::fabs(total - 1.0) <= 1e-10, "weights must sum to 1");
  }

  static DiscretePrior point_mass(double at) { return {{at}, {1.0}}; }
};

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 600;

  void validate() const {
    detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "grid needs lo < hi");
    detail::require(count >= 2, "grid needs at least two points");
  }

  /// 600 equispaced atoms on [min x - sigma, max x + sigma].
  static GridSpec covering(const NormalMeansData& data, std::size_t count = 600) {
    data.validate();
    const auto [mn, mx] = std::minmax_element(data.x.begin(), data.x.end());
    return {*mn - data.sigma, *mx + data.sigma, count};
  }
};

/// phi_sigma convolved with a discrete prior; its Tweedie rule is exactly
/// the posterior mean under that prior.
class MixtureMarginal {
 public:
  static constexpr MethodTag method_tag = MethodTag::Exact;

  MixtureMarginal(DiscretePrior prior, double sigma) : prior_(std::move(prior)), sigma_(sigma) {
    prior_.validate();
    detail::require_positive(sigma_, "sigma");
    for (std::size_t k = 0; k < prior_.atoms.size(); ++k)
      if (prior_.weights[k] > 0.0) {
        atoms_.push_back(prior_.atoms[k]);
        log_w_.push_back(std::log(prior_.weights[k]));
      }
  }

  double log_density(double x) const {
    std::vector<double> terms(atoms_.size());
    for (std::size_t k = 0; k < atoms_.size(); ++k)
      terms[k] = log_w_[k] + normal_logpdf(x, atoms_[k], sigma_);
    return log_sum_exp(terms);
  }

  ScoreValue score(double x) const {
    const double mean = posterior_mean(x);
    return {(mean - x) / (sigma_ * sigma_), false};
  }

  /// sum_k a_k w_k phi(x - a_k) / sum_k w_k phi(x - a_k).
  double posterior_mean(double x) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(atoms_.size());
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      const double z = (x - atoms_[k]) / sigma_;
      terms[k] = log_w_[k] - 0.5 * z * z;
      mx = std::max(mx, terms[k]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      const double e = std::exp(terms[k] - mx);
      num += e * atoms_[k];
      den += e;
    }
    return num / den;
  }

  const DiscretePrior& prior() const { return prior_; }
  double sigma() const { return sigma_; }

 private:
  DiscretePrior prior_;
  double sigma_;
  std::vector<double> atoms_;
  std::vector<double> log_w_;
};

/// sum_i log sum_k w_k phi_sigma(x_i - a_k).
inline double marginal_loglik(const DiscretePrior& prior, const NormalMeansData& data) {
  prior.validate();
  data.validate();
  const MixtureMarginal m(prior, data.sigma);
  double total = 0.0;
  for (double x : data.x) total += m.log_density(x);
  return total;
}

struct NpmleOptions {
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  // SQUAREM extrapolation of the EM map, plus constrained Newton steps once
  // few atoms carry weight. Every accepted step raises the likelihood.
  bool accelerate = true;
  // Atoms below this weight whose gradient is under 1 are zeroed when that
  // does not lower the likelihood. 0 disables screening.
  double screen_weight = 1e-3;
  // Period of the check for dead grid atoms worth reviving. 0 disables it.
  std::size_t revive_every = 25;
  Eigen::Index newton_atoms = 150;
};

struct NpmleFit {
  DiscretePrior prior;
  // Marginal log-likelihood after each iteration (index 0 = uniform start).
  std::vector<double> loglik_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// Row-scaled likelihood matrix L_ik = phi(x_i - a_k) / max_k phi(x_i - a_k).
// Each EM update is two matrix-vector products.
class MixtureLikelihood {
 public:
  MixtureLikelihood(const std::vector<double>& x, const std::vector<double>& atoms, double sigma)
      : lik_(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(atoms.size())) {
    for (Eigen::Index i = 0; i < lik_.rows(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < lik_.cols(); ++k) {
        const double z = (x[static_cast<std::size_t>(i)] - atoms[static_cast<std::size_t>(k)]) / sigma;
        lik_(i, k) = -0.5 * z * z;
        best = std::max(best, lik_(i, k));
      }
      lik_.row(i) = (lik_.row(i).array() - best).exp();
      offset_ += best - kLogSqrt2Pi - std::log(sigma);
    }
  }

  // Marginal log-likelihood at w; leaves the mixture densities in `mix`.
  double loglik(const Eigen::VectorXd& w, Eigen::VectorXd& mix) const {
    mix.noalias() = lik_ * w;
    return offset_ + mix.array().log().sum();
  }

  // Average likelihood ratio L^T (1 / mix) / n; equals 1 on the support of
  // the maximizer and is at most 1 elsewhere.
  void gradient(const Eigen::VectorXd& mix, Eigen::VectorXd& grad) const {
    grad.noalias() = lik_.transpose() * mix.cwiseInverse();
    grad /= static_cast<double>(lik_.rows());
  }

  // Likelihood ratios L_ik / mix_i.
  Eigen::MatrixXd ratios(const Eigen::VectorXd& mix) const { return mix.cwiseInverse().asDiagonal() * lik_; }

  static void em_update(const Eigen::VectorXd& w, const Eigen::VectorXd& grad, Eigen::VectorXd& out) {
    out = w.cwiseProduct(grad);
    out /= out.sum();
    // Keeps the products away from subnormal arithmetic.
    out = (out.array() < 1e-200).select(0.0, out);
  }

  Eigen::Index rows() const { return lik_.rows(); }
  Eigen::Index cols() const { return lik_.cols(); }

  // Same likelihood restricted to a subset of the atoms.
  MixtureLikelihood restricted(const std::vector<Eigen::Index>& keep) const {
    MixtureLikelihood out;
    out.lik_.resize(lik_.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      out.lik_.col(static_cast<Eigen::Index>(j)) = lik_.col(keep[j]);
    out.offset_ = offset_;
    return out;
  }

 private:
  MixtureLikelihood() = default;

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lik_;
  double offset_ = 0.0;
};

}  // namespace detail

/// NPMLE of the mixing distribution restricted to a fixed grid, by EM on the
/// grid weights. The log-likelihood trace is nondecreasing; iteration stops
/// when the per-iteration gain drops below tol (and no dead atom has gradient
/// above 1) or max_iter is reached.
inline NpmleFit fit_npmle(const NormalMeansData& data, const GridSpec& grid,
                          const NpmleOptions& opts = {}) {
  if (data.x.empty()) throw DomainError("fit_npmle: empty data");
  data.validate();
  grid.validate();
  detail::require_positive(opts.tol, "tol");
  detail::require(opts.max_iter >= 1, "max_iter must be positive");
  const auto [mn, mx] = std::minmax_element(data.x.begin(), data.x.end());
  const double slack = 1e-9 * std::max(1.0, std::fabs(*mn) + std::fabs(*mx));
  if (grid.lo > *mn - data.sigma + slack || grid.hi < *mx + data.sigma - slack)
    throw DomainError("fit_npmle: grid must cover [min x - sigma, max x + sigma]");

  const std::vector<double> atoms = linspace(grid.lo, grid.hi, grid.count);
  const detail::MixtureLikelihood full(data.x, atoms, data.sigma);
  const auto k = static_cast<Eigen::Index>(atoms.size());

  // Zero weights stay zero under EM, so the iterations run on the live atoms
  // only. `grid_w` holds the weights over the whole grid.
  Eigen::VectorXd grid_w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<Eigen::Index> active;
  detail::MixtureLikelihood lik = full;
  Eigen::VectorXd w;
  const auto scatter = [&] {
    grid_w.setZero();
    for (std::size_t j = 0; j < active.size(); ++j) grid_w[active[j]] = w[static_cast<Eigen::Index>(j)];
  };
  const auto compact = [&] {
    active.clear();
    for (Eigen::Index j = 0; j < k; ++j)
      if (grid_w[j] > 0.0) active.push_back(j);
    lik = full.restricted(active);
    w.resize(static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) w[static_cast<Eigen::Index>(j)] = grid_w[active[j]];
  };
  compact();

  Eigen::VectorXd mix(lik.rows()), mix_next(lik.rows());
  Eigen::VectorXd grad, grid_grad, w1, w2, proposal, next, trial;
  double ll = lik.loglik(w, mix);

  // Screening: atoms with gradient below 1 carry no mass at the optimum.
  // Zero the small ones, largest threshold first, if likelihood does not drop.
  const auto screen = [&] {
    for (double cut = opts.screen_weight; cut >= opts.screen_weight * 1e-3; cut *= 0.1) {
      trial = w;
      bool any = false;
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w[j] > 0.0 && w[j] < cut && grad[j] < 1.0) {
          trial[j] = 0.0;
          any = true;
        }
      }
      if (!any) return;
      trial /= trial.sum();
      const double ll_trial = lik.loglik(trial, mix_next);
      if (ll_trial >= ll) {
        w.swap(trial);
        mix.swap(mix_next);
        ll = ll_trial;
        lik.gradient(mix, grad);
        return;
      }
    }
  };

  // Vertex-direction step: bring back the dead grid atom with the largest
  // gradient if it exceeds 1. Returns whether an atom was added.
  const auto revive = [&] {
    full.gradient(mix, grid_grad);
    Eigen::Index best = -1;
    double best_grad = 1.0 + 1e-7;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (grid_w[j] == 0.0 && grid_grad[j] > best_grad) {
        best = j;
        best_grad = grid_grad[j];
      }
    }
    if (best < 0) return false;
    for (double step = 0.5; step > 1e-12; step *= 0.25) {
      trial = (1.0 - step) * grid_w;
      trial[best] += step;
      const double ll_trial = full.loglik(trial, mix_next);
      if (ll_trial > ll) {
        grid_w.swap(trial);
        compact();
        mix.swap(mix_next);
        ll = ll_trial;
        return true;
      }
    }
    return false;
  };

  // Constrained Newton step over the live atoms plus the dead atoms where the
  // gradient has a local maximum above 1: nonnegative least squares on the
  // likelihood ratios, then a backtracking line search toward the solution.
  std::vector<Eigen::Index> candidates;
  const auto newton = [&] {
    scatter();
    full.gradient(mix, grid_grad);
    candidates.clear();
    for (Eigen::Index j = 0; j < k; ++j) {
      const bool peak = grid_grad[j] > 1.0 && (j == 0 || grid_grad[j] >= grid_grad[j - 1]) &&
                        (j + 1 == k || grid_grad[j] >= grid_grad[j + 1]);
      if (grid_w[j] > 0.0 || peak) candidates.push_back(j);
    }
    const detail::MixtureLikelihood sub = full.restricted(candidates);
    Eigen::VectorXd base(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t j = 0; j < candidates.size(); ++j) base[static_cast<Eigen::Index>(j)] = grid_w[candidates[j]];
    // The weighted last row holds the weights to sum 1.
    const Eigen::Index n = sub.rows();
    const double pin = 10.0 * std::sqrt(static_cast<double>(n));
    Eigen::MatrixXd design(n + 1, base.size());
    design.topRows(n) = sub.ratios(mix);
    design.row(n).setConstant(pin);
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n + 1, 2.0);
    rhs[n] = pin;
    Eigen::VectorXd target = nnls(design, rhs);
    const double total = target.sum();
    if (!(total > 0.0)) return;
    target /= total;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      trial = base + t * (target - base);
      const double ll_trial = sub.loglik(trial, mix_next);
      if (ll_trial > ll) {
        grid_w.setZero();
        for (std::size_t j = 0; j < candidates.size(); ++j) grid_w[candidates[j]] = trial[static_cast<Eigen::Index>(j)];
        compact();
        mix.swap(mix_next);
        ll = ll_trial;
        return;
      }
    }
  };

  NpmleFit fit;
  fit.loglik_trace.push_back(ll);
  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    lik.gradient(mix, grad);
    if (opts.screen_weight > 0.0) screen();

    double ll_next = 0.0;
    detail::MixtureLikelihood::em_update(w, grad, w1);
    if (!opts.accelerate) {
      next = w1;
      ll_next = lik.loglik(next, mix_next);
    } else {
      // SQUAREM extrapolation from two EM steps, stabilized by a third and
      // backtracked toward plain EM until it does not lose likelihood.
      const double ll1 = lik.loglik(w1, mix_next);
      lik.gradient(mix_next, grad);
      detail::MixtureLikelihood::em_update(w1, grad, w2);
      const Eigen::VectorXd r = w1 - w;
      const Eigen::VectorXd v = w2 - 2.0 * w1 + w;
      const double vv = v.squaredNorm();
      double alpha = vv > 0.0 ? std::min(-1.0, -std::sqrt(r.squaredNorm() / vv)) : -1.0;
      bool accepted = false;
      for (int attempt = 0; attempt < 4 && alpha < -1.0; ++attempt) {
        proposal = (w - 2.0 * alpha * r + alpha * alpha * v).cwiseMax(0.0);
        const double total = proposal.sum();
        if (total > 0.0) {
          proposal /= total;
          lik.loglik(proposal, mix_next);
          lik.gradient(mix_next, grad);
          detail::MixtureLikelihood::em_update(proposal, grad, next);
          ll_next = lik.loglik(next, mix_next);
          if (std::isfinite(ll_next) && ll_next >= std::max(ll, ll1)) {
            accepted = true;
            break;
          }
        }
        alpha = 0.5 * (alpha - 1.0);
      }
      if (!accepted) {
        next = w2;
        ll_next = lik.loglik(next, mix_next);
      }
    }
    w.swap(next);
    mix.swap(mix_next);
    ll = ll_next;
    if ((w.array() > 0.0).count() < w.size()) {
      scatter();
      compact();
    }
    if (opts.accelerate && w.size() <= opts.newton_atoms) newton();
    const double gain = ll - fit.loglik_trace.back();
    bool revived = false;
    if (opts.revive_every > 0 && ((iter + 1) % opts.revive_every == 0 || gain < opts.tol)) {
      scatter();
      revived = revive();
    }
    fit.loglik_trace.push_back(ll);
    fit.iterations = iter + 1;
    if (gain < opts.tol && !revived) {
      fit.converged = true;
      break;
    }
  }
  scatter();
  std::vector<double> weights(grid_w.data(), grid_w.data() + k);
  double total = 0.0;
  for (double v : weights) total += v;
  for (double& v : weights) v /= total;
  fit.prior = DiscretePrior{atoms, std::move(weights)};
  return fit;
}

inline NpmleFit fit_npmle(const NormalMeansData& data) {
  return fit_npmle(data, GridSpec::covering(data));
}

/// Posterior mean under the discrete prior; nondecreasing in x.
inline ShrinkageRule bayes_rule_discrete(const DiscretePrior& prior, double sigma,
                                         const std::vector<double>& grid) {
  require_increasing_grid(grid);
  const MixtureMarginal m(prior, sigma);
  ShrinkageRule rule;
  rule.method_tag = MethodTag::NpmleG;
  rule.grid = grid;
  rule.values.reserve(grid.size());
  for (double x : grid) rule.values.push_back(m.posterior_mean(x));
  rule.validate();
  return rule;
}

/// Drops atoms with weight below eps and renormalizes.
///
/// If `prior` satisfies the NPMLE optimality conditions on `n` observations
/// and no observation draws more than half its mixture density from the
/// dropped atoms, the marginal log-likelihood moves by at most
/// 4 * n * dropped_mass <= 4 * n * eps * dropped_count (see prune_loglik_bound).
inline DiscretePrior support_prune(const DiscretePrior& prior, double eps) {
  prior.validate();
  detail::require_positive(eps, "eps");
  detail::require(eps < 1.0 / static_cast<double>(prior.atoms.size()),
                  "eps must be below 1 / number of atoms");
  DiscretePrior out;
  double kept = 0.0;
  for (std::size_t k = 0; k < prior.atoms.size(); ++k)
    if (prior.weights[k] >= eps) {
      out.atoms.push_back(prior.atoms[k]);
      out.weights.push_back(prior.weights[k]);
      kept += prior.weights[k];
    }
  if (out.atoms.empty()) throw DomainError("support_prune: every weight is below eps");
  for (double& w : out.weights) w /= kept;
  return out;
}

inline double prune_loglik_bound(std::size_t n, double eps, std::size_t dropped_count) {
  return 4.0 * static_cast<double>(n) * eps * static_cast<double>(dropped_count);
}

}  // namespace ebhb
