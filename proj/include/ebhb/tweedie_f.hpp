#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ebhb/dist.hpp"
#include "ebhb/errors.hpp"
#include "ebhb/normal_means.hpp"

namespace ebhb {

struct Support {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// d/dx log m(x), flagged when x lies outside the fitted support.
struct ScoreValue {
  double value = 0.0;
  bool extrapolated = false;
};

/// A marginal density of X usable in the Tweedie formula.
template <typename M>
concept Marginal = requires(const M& m, double x) {
  { m.log_density(x) } -> std::convertible_to<double>;
  { m.score(x) } -> std::same_as<ScoreValue>;
  { M::method_tag } -> std::convertible_to<MethodTag>;
};

/// Exact N(mean, variance) marginal, e.g. a N(0, A) prior convolved with
/// N(0, sigma^2) noise gives N(0, A + sigma^2).
struct GaussianMarginal {
  static constexpr MethodTag method_tag = MethodTag::Exact;

  double mean = 0.0;
  double variance = 1.0;

  double log_density(double x) const { return normal_logpdf(x, mean, std::sqrt(variance)); }
  ScoreValue score(double x) const { return {-(x - mean) / variance, false}; }
};

/// Natural cubic spline basis (truncated-power form) without the constant
/// term: linear beyond the boundary knots, df = knots - 1 functions.
class NaturalSplineBasis {
 public:
  NaturalSplineBasis() = default;

  explicit NaturalSplineBasis(std::vector<double> knots) {
    detail::require(knots.size() >= 2, "natural spline needs at least two knots");
    for (std::size_t i = 1; i < knots.size(); ++i)
      detail::require(knots[i] > knots[i - 1], "spline knots must be strictly increasing");
    center_ = 0.5 * (knots.front() + knots.back());
    half_width_ = 0.5 * (knots.back() - knots.front());
    knots_.reserve(knots.size());
    for (double k : knots) knots_.push_back((k - center_) / half_width_);
    raw_knots_ = std::move(knots);
  }

  std::size_t size() const { return knots_.size() - 1; }
  const std::vector<double>& knots() const { return raw_knots_; }

  void evaluate(double x, std::span<double> out) const {
    const double s = (x - center_) / half_width_;
    const std::size_t kk = knots_.size();
    out[0] = s;
    const double dlast = cubic_d(kk - 2, s);
    for (std::size_t k = 0; k + 2 < kk; ++k) out[k + 1] = cubic_d(k, s) - dlast;
  }

  void derivative(double x, std::span<double> out) const {
    const double s = (x - center_) / half_width_;
    const std::size_t kk = knots_.size();
    const double inv = 1.0 / half_width_;
    out[0] = inv;
    const double dlast = quad_d(kk - 2, s);
    for (std::size_t k = 0; k + 2 < kk; ++k) out[k + 1] = (quad_d(k, s) - dlast) * inv;
  }

 private:
  static double pos3(double v) { return v > 0.0 ? v * v * v : 0.0; }
  static double pos2(double v) { return v > 0.0 ? v * v : 0.0; }

  double cubic_d(std::size_t k, double s) const {
    const double last = knots_.back();
    return (pos3(s - knots_[k]) - pos3(s - last)) / (last - knots_[k]);
  }
  double quad_d(std::size_t k, double s) const {
    const double last = knots_.back();
    return 3.0 * (pos2(s - knots_[k]) - pos2(s - last)) / (last - knots_[k]);
  }

  std::vector<double> knots_;
  std::vector<double> raw_knots_;
  double center_ = 0.0;
  double half_width_ = 1.0;
};

/// Log-spline estimate of the marginal density from Lindsey's method.
/// log m(x) = c0 + sum_j c_j N_j(x) - log Z, normalized over the support.
class MarginalFit {
 public:
  static constexpr MethodTag method_tag = MethodTag::FModel;

  MarginalFit(NaturalSplineBasis basis, std::vector<double> coefficients, Support support,
              std::size_t bins, std::vector<double> deviance_trace)
      : basis_(std::move(basis)),
        coef_(std::move(coefficients)),
        support_(support),
        bins_(bins),
        deviance_trace_(std::move(deviance_trace)) {
    detail::require(coef_.size() == basis_.size() + 1, "coefficient count must be df + 1");
    log_norm_ = compute_log_normalizer();
  }

  double log_density(double x) const { return eta(x) - log_norm_; }

  ScoreValue score(double x) const {
    std::vector<double> d(basis_.size());
    basis_.derivative(x, d);
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) s += coef_[j + 1] * d[j];
    return {s, !support_.contains(x)};
  }

  const Support& support() const { return support_; }
  std::size_t bins() const { return bins_; }
  std::size_t df() const { return basis_.size(); }
  const NaturalSplineBasis& basis() const { return basis_; }
  // Intercept first, then one coefficient per basis function.
  const std::vector<double>& coefficients() const { return coef_; }
  // Penalized Poisson deviance after each accepted Newton step.
  const std::vector<double>& deviance_trace() const { return deviance_trace_; }
  double log_normalizer() const { return log_norm_; }

 private:
  double eta(double x) const {
    std::vector<double> b(basis_.size());
    basis_.evaluate(x, b);
    double s = coef_[0];
    for (std::size_t j = 0; j < b.size(); ++j) s += coef_[j + 1] * b[j];
    return s;
  }

  // The log-density is a cubic between knots, so 20-point Gauss-Legendre on
  // 16 panels per knot interval is exact to rounding.
  double compute_log_normalizer() const {
    std::vector<double> br{support_.lo, support_.hi};
    for (double k : basis_.knots())
      if (k > support_.lo && k < support_.hi) br.push_back(k);
    std::sort(br.begin(), br.end());
    double shift = -std::numeric_limits<double>::infinity();
    for (double b : br) shift = std::max(shift, eta(b));
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
      shift = std::max(shift, eta(0.5 * (br[i] + br[i + 1])));
    double total = 0.0;
    constexpr int kPanels = 16;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
      const double h = (br[i + 1] - br[i]) / kPanels;
      for (int p = 0; p < kPanels; ++p) {
        const double a = br[i] + h * p;
        total += boost::math::quadrature::gauss<double, 20>::integrate(
            [&](double x) { return std::exp(eta(x) - shift); }, a, a + h);
      }
    }
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericError("marginal fit could not be normalized");
    return shift + std::log(total);
  }

  NaturalSplineBasis basis_;
  std::vector<double> coef_;
  Support support_;
  std::size_t bins_ = 0;
  std::vector<double> deviance_trace_;
  double log_norm_ = 0.0;
};

/// Lindsey's method: bin the data on [min x - 3 sigma, max x + 3 sigma],
/// then fit a Poisson regression of the counts on a natural spline in the bin
/// midpoints (df basis functions, equispaced knots). Damped Newton with a
/// 1e-8 ridge on the orthonormalized coefficients.
inline MarginalFit fit_marginal(const NormalMeansData& data, std::size_t bins = 60,
                                std::size_t df = 5) {
  detail::require(df >= 1, "df must be at least 1");
  data.validate(std::max<std::size_t>(df * 5, 20));
  if (bins < df + 2)
    throw FitError("singular basis: bins must be at least df + 2");

  const auto [mn_it, mx_it] = std::minmax_element(data.x.begin(), data.x.end());
  const double xmin = *mn_it, xmax = *mx_it;
  if (!(xmax - xmin > 1e-12 * std::max(1.0, std::fabs(xmin))))
    throw FitError("degenerate data: all observations are equal");

  const Support support{xmin - 3.0 * data.sigma, xmax + 3.0 * data.sigma};
  const double width = (support.hi - support.lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0), mids(bins);
  for (std::size_t j = 0; j < bins; ++j) mids[j] = support.lo + width * (static_cast<double>(j) + 0.5);
  for (double v : data.x) {
    auto j = static_cast<std::size_t>((v - support.lo) / width);
    counts[std::min(j, bins - 1)] += 1.0;
  }

  NaturalSplineBasis basis(linspace(mids.front(), mids.back(), df + 1));
  const std::size_t p = df + 1;
  Eigen::MatrixXd design(bins, p);
  std::vector<double> row(df);
  for (std::size_t j = 0; j < bins; ++j) {
    basis.evaluate(mids[j], row);
    design(j, 0) = 1.0;
    for (std::size_t k = 0; k < df; ++k) design(j, k + 1) = row[k];
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(bins, p);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  if (r.diagonal().cwiseAbs().minCoeff() < 1e-10 * rmax)
    throw FitError("singular basis: spline design matrix is rank deficient");

  const Eigen::Map<const Eigen::VectorXd> c(counts.data(), static_cast<Eigen::Index>(bins));
  constexpr double kRidge = 1e-8;
  auto objective = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd eta = q * g;
    double dev = 0.0;
    for (Eigen::Index j = 0; j < eta.size(); ++j) {
      const double mu = std::exp(eta[j]);
      dev += 2.0 * ((c[j] > 0.0 ? c[j] * (std::log(c[j]) - eta[j]) : 0.0) - (c[j] - mu));
    }
    return dev + kRidge * g.squaredNorm();
  };

  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  beta0[0] = std::log(c.mean());
  Eigen::VectorXd gamma = r * beta0;
  double obj = objective(gamma);
  std::vector<double> trace{obj};
  bool converged = false;
  for (int iter = 0; iter < 200 && !converged; ++iter) {
    const Eigen::VectorXd mu = (q * gamma).array().exp().matrix();
    const Eigen::VectorXd grad = q.transpose() * (c - mu) - kRidge * gamma;
    Eigen::MatrixXd hess = q.transpose() * mu.asDiagonal() * q;
    hess.diagonal().array() += kRidge;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd cand = gamma + step;
    double cand_obj = objective(cand);
    while (!(cand_obj <= obj) && t > 1e-12) {
      t *= 0.5;
      cand = gamma + t * step;
      cand_obj = objective(cand);
    }
    if (!(cand_obj <= obj)) {
      converged = grad.norm() < 1e-6 * (1.0 + c.sum());
      break;
    }
    converged = (obj - cand_obj) < 1e-11 * (1.0 + std::fabs(obj)) || step.norm() * t < 1e-12;
    gamma = cand;
    obj = cand_obj;
    trace.push_back(obj);
  }
  if (!converged) throw FitError("Poisson spline regression did not converge");

  const Eigen::VectorXd beta = r.triangularView<Eigen::Upper>().solve(gamma);
  std::vector<double> coef(beta.data(), beta.data() + beta.size());
  for (double v : coef)
    if (!std::isfinite(v)) throw FitError("non-finite spline coefficient");
  return MarginalFit(std::move(basis), std::move(coef), support, bins, std::move(trace));
}

template <Marginal M>
ScoreValue score(const M& marginal, double x) {
  return marginal.score(x);
}

/// Tweedie plug-in: rule(x) = x + sigma^2 d/dx log m(x).
template <Marginal M>
ShrinkageRule tweedie_rule(const M& marginal, double sigma, const std::vector<double>& grid) {
  detail::require_positive(sigma, "sigma");
  require_increasing_grid(grid);
  ShrinkageRule rule;
  rule.method_tag = M::method_tag;
  rule.grid = grid;
  rule.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ScoreValue s = marginal.score(grid[i]);
    rule.values[i] = grid[i] + sigma * sigma * s.value;
    if (s.extrapolated) rule.extrapolated.push_back(i);
  }
  rule.validate();
  return rule;
}

}  // namespace ebhb
